#include <catch_amalgamated.hpp>

#include "embercall/build.hpp"
#include "embercall/inference.hpp"
#include "embercall/synthetic.hpp"
#include "embercall/training.hpp"
#include "support.hpp"

using namespace embercall;

namespace {

/// One synthetic corpus built once per process.
struct BuiltCorpus {
  test::TempDir dir{"built"};
  std::vector<CorpusTrack> corpus;
  BuildConfig config;
  RunReport first;
  Dataset dataset;

  BuiltCorpus() {
    corpus = write_synthetic_corpus(dir / "corpus");
    config.out = dir / "out";
    first = run_build(corpus, config, 2);
    dataset = load_dataset(BuildLayout{config.out}.dataset_dir(config.version));
  }
};

BuiltCorpus& built() {
  static BuiltCorpus b;
  return b;
}

std::vector<CorpusTrack> single_track(const fs::path& dir, double seconds, int rate) {
  AudioClip clip = test::noise_clip(static_cast<std::size_t>(seconds * rate), rate, 5, 0.1, "T1");
  write_wav(dir / "T1.wav", clip, WavEncoding::Pcm16);
  return {{"T1", dir / "T1.wav", "syn003", {}}};
}

std::vector<std::string> ids_of(const TaskGraph& g) {
  std::vector<std::string> ids;
  for (const auto& t : g.tasks()) ids.push_back(t.id);
  return ids;
}

}  // namespace

TEST_CASE("corpus manifests", "[build]") {
  test::TempDir dir("corpus");
  const std::vector<CorpusTrack> tracks{{"A", dir / "a.wav", "syn001", {"syn002", "syn003"}},
                                        {"B", "b.wav", "syn002", {}}};
  save_corpus(dir / "c.csv", tracks);
  const auto back = load_corpus(dir / "c.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].secondary_labels == std::vector<std::string>{"syn002", "syn003"});
  CHECK(back[1].wav_path == dir / "b.wav");

  atomic_write_bytes(dir / "dup.csv", "track_stem,wav_path,primary_label,secondary_labels\nA,a.wav,x,\nA,b.wav,y,\n");
  CHECK_THROWS_WITH(load_corpus(dir / "dup.csv"), Catch::Matchers::ContainsSubstring("duplicate track stem"));
  atomic_write_bytes(dir / "part.csv", "track_stem,wav_path,primary_label,secondary_labels\nA_part001,a.wav,x,\n");
  CHECK_THROWS_AS(load_corpus(dir / "part.csv"), ValidationError);
}

TEST_CASE("build plan for one short track", "[build]") {
  test::TempDir dir("plan");
  const auto corpus = single_track(dir.path(), 12.0, 8000);
  BuildConfig config;
  config.out = dir / "out";
  const auto backends = std::make_shared<const Backends>(make_synthetic_backends());
  const auto g = plan_build(corpus, config, backends, std::make_shared<const TaxonomyMap>(TaxonomyMap::synthetic()));
  CHECK(ids_of(g) == std::vector<std::string>{"chunk:T1", "separate:T1_part000", "embed:T1_part000:original",
                                              "embed:T1_part000:source0", "embed:T1_part000:source1",
                                              "embed:T1_part000:source2", "embed:T1_part000:source3",
                                              "annotate:T1_part000", "shard:T1_part000", "consolidate:emb_v4"});
  CHECK_NOTHROW(g.topological_order());
  const auto& deps = g.dependencies();
  CHECK(deps[g.index_of("consolidate:emb_v4")] == std::vector<std::size_t>{g.index_of("shard:T1_part000")});
  CHECK(deps[g.index_of("annotate:T1_part000")].size() == 7);

  config.num_sources = 8;
  CHECK(plan_build(corpus, config, backends, std::make_shared<const TaxonomyMap>(TaxonomyMap::synthetic())).size() == 14);
  config.num_sources = 5;
  CHECK_THROWS_AS(config.validate(), ValidationError);
}

TEST_CASE("a long track fans out into chunk branches", "[build]") {
  test::TempDir dir("long");
  const auto corpus = single_track(dir.path(), 400.0, 8000);
  BuildConfig config;
  config.out = dir / "out";
  const auto g = plan_build(corpus, config, std::make_shared<const Backends>(make_synthetic_backends()),
                            std::make_shared<const TaxonomyMap>(TaxonomyMap::synthetic()));
  int shards = 0;
  for (const auto& id : ids_of(g)) shards += id.rfind("shard:", 0) == 0;
  CHECK(shards == 4);
  CHECK(g.size() == 1 + 4 * 8 + 1);
  CHECK(g.tasks().front().outputs.size() == 4);
  CHECK(g.index_of("shard:T1_part003") > 0);
}

TEST_CASE("an empty corpus fails at consolidation", "[build]") {
  test::TempDir dir("empty");
  BuildConfig config;
  config.out = dir / "out";
  const auto r = run_build({}, config, 1);
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors.at("consolidate:emb_v4").find("no shards") != std::string::npos);
  CHECK(fs::exists(BuildLayout{config.out}.report_file()));
}

TEST_CASE("synthetic build end to end", "[build][slow]") {
  auto& b = built();
  REQUIRE(b.first.ok());
  CHECK(b.first.executed.size() == 12 * 9 + 1);
  CHECK(b.dataset.rows.size() == 12 * 22 * 5);
  CHECK(b.dataset.manifest.shards.size() == 12);
  CHECK(b.dataset.manifest.config.at("seed") == 0);

  std::set<std::string> stems;
  for (const auto& r : b.dataset.rows) {
    stems.insert(r.track_stem);
    CHECK(r.embedding.size() == 320);
    CHECK(r.prediction_vec.size() == 3337);
    CHECK(r.predictions.size() == 5);
  }
  CHECK(stems.size() == 12);

  SECTION("a second run executes nothing") {
    const auto again = run_build(b.corpus, b.config, 2);
    CHECK(again.executed.empty());
    CHECK(again.skipped.size() == 109);
  }
  SECTION("deleting one shard reruns that branch and consolidation") {
    const BuildLayout layout{b.config.out};
    const auto dataset_file = layout.dataset_dir(b.config.version) / kDatasetFile;
    const auto before = read_file(dataset_file);
    const auto victim = fs::path(b.dataset.manifest.shards.at(3).path).stem().string();
    REQUIRE(fs::remove(layout.shard(victim)));
    const auto again = run_build(b.corpus, b.config, 2);
    auto executed = again.executed;
    std::sort(executed.begin(), executed.end());
    CHECK(executed == std::vector<std::string>{"consolidate:emb_v4", "shard:" + victim});
    CHECK(read_file(dataset_file) == before);
  }
}

TEST_CASE("training split keeps tracks whole", "[training]") {
  std::map<std::string, std::string> primary;
  for (int s = 0; s < 5; ++s)
    for (int t = 0; t < 1 + s; ++t) primary["sp" + std::to_string(s) + "_" + std::to_string(t)] = "sp" + std::to_string(s);
  const auto held = validation_tracks(primary, 0.3, 4);
  CHECK(validation_tracks(primary, 0.3, 4) == held);
  std::map<std::string, int> per_species;
  for (const auto& t : held) ++per_species[primary.at(t)];
  CHECK_FALSE(per_species.count("sp0"));
  CHECK(per_species.at("sp1") == 1);
  CHECK(per_species.at("sp2") == 1);
  CHECK(per_species.at("sp3") == 1);
  CHECK(per_species.at("sp4") == 2);
}

TEST_CASE("model and variant compatibility", "[training]") {
  CHECK_THROWS_WITH(check_compatible(ModelKind::Cnb, Variant::M1), Catch::Matchers::ContainsSubstring("complement NB"));
  CHECK_NOTHROW(check_compatible(ModelKind::Cnb, Variant::LogitSoftmax));
  CHECK_NOTHROW(check_compatible(ModelKind::Mlp, Variant::M4));
  CHECK(parse_model_kind("stack") == ModelKind::Stack);
  CHECK_THROWS_AS(parse_model_kind("svm"), ValidationError);
}

TEST_CASE("training on the synthetic dataset", "[training][slow]") {
  const auto& ds = built().dataset;
  SECTION("logreg on M1 generalizes to held-out tracks") {
    const auto r = train_model(ds, {});
    REQUIRE(r.validation.has_value());
    CHECK(r.validation->macro_precision >= 0.9);
    CHECK(r.train_rows == 176);
    CHECK(r.validation_rows == 88);
    CHECK(r.model.classes.back() == kNoCall);

    std::set<std::string> held(r.validation_tracks.begin(), r.validation_tracks.end());
    CHECK(held.size() == 4);
    CHECK(r.report().at("validation_tracks").size() == 4);
  }
  SECTION("every feature matches its variant dimension") {
    const auto labeled = label_dataset(ds, LabelingConfig::from_manifest(ds.manifest));
    for (auto v : {Variant::M1, Variant::M2, Variant::M3, Variant::M4, Variant::Concat5s, Variant::LogitSoftmax}) {
      const auto set = assemble_features(labeled.rows, labeled.labels, v);
      CHECK_FALSE(set.features.empty());
      for (const auto& f : set.features) CHECK(f.values.size() == feature_dim(v));
    }
  }
  SECTION("complement NB needs logit features") {
    TrainOptions opts;
    opts.model = ModelKind::Cnb;
    CHECK_THROWS_AS(train_model(ds, opts), ValidationError);
    opts.variant = Variant::LogitSoftmax;
    const auto r = train_model(ds, opts);
    CHECK(r.model.model->kind() == "cnb");
  }
  SECTION("search picks one of its trials") {
    TrainOptions opts;
    opts.search_budget = 3;
    opts.seed = 2;
    const auto r = train_model(ds, opts);
    REQUIRE(r.search.has_value());
    CHECK(r.search->trials.size() == 3);
    CHECK(r.chosen.l2 == r.search->best.at("l2"));
  }
  SECTION("no-call detector") {
    const auto report = nocall_report(ds, 0.5, 0, 1);
    CHECK(report.accuracy >= 0.9);
    CHECK(report.text().find("predicted") != std::string::npos);
    CHECK(report.test_rows > 0);
  }
}

TEST_CASE("inference on a synthetic soundscape", "[training][slow]") {
  const auto r = train_model(built().dataset, {});
  const auto taxonomy = TaxonomyMap::synthetic();
  const SyntheticEmbedder embedder;
  SoundscapeOptions opts;
  opts.calls = 10;
  const auto clip = synth_soundscape("SOUND1", opts);
  const auto result = infer_soundscape(r.model, clip, embedder, taxonomy);
  REQUIRE(result.row_ids.size() == 120);
  CHECK(result.row_ids.front() == "SOUND1_5");
  CHECK(result.row_ids.back() == "SOUND1_600");
  CHECK(result.submission.rows() == 120);
  CHECK(result.submission.cols() == 264);
  CHECK(result.submission.minCoeff() >= 0.0);
  CHECK(result.submission.maxCoeff() <= 1.0);

  test::TempDir dir("submission");
  write_submission(dir / "s.csv", result);
  const auto csv = read_csv(dir / "s.csv");
  CHECK(csv.size() == 121);
  CHECK(csv[0].size() == 265);

  auto short_clip = clip;
  short_clip.samples.resize(4 * static_cast<std::size_t>(clip.sample_rate));
  CHECK_THROWS_AS(infer_soundscape(r.model, short_clip, embedder, taxonomy), ValidationError);
  auto foreign = r.model;
  foreign.classes.front() = "notabird";
  CHECK_THROWS_AS(check_model_taxonomy(foreign, taxonomy), ValidationError);

  const auto p = project_dataset(built().dataset, parse_filter("track_type=original"), dir / "p.csv");
  CHECK(p.coords.rows() == 12 * 22);
  CHECK(read_csv(dir / "p.csv")[0] == std::vector<std::string>{"track_name", "start_time", "label", "x", "y"});
}
