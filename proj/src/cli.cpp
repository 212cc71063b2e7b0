#include "embercall/cli.hpp"

#include <CLI11.hpp>
#include <iostream>

#include "embercall/build.hpp"
#include "embercall/inference.hpp"
#include "embercall/synthetic.hpp"
#include "embercall/training.hpp"

namespace embercall {

namespace {

using Json = nlohmann::json;

struct BuildArgs {
  std::string corpus, out, version = "emb_v4", selector = "max_energy", policy = "threshold_primary", taxonomy;
  int workers = 1;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  double chunk_threshold = 180.0;
  bool no_resume = false;
};

struct TrainArgs {
  std::string dataset, variant = "M1", model = "logreg", out, metrics, trials, selector, policy;
  int search = 0;
  std::uint64_t seed = 0;
  double validation = 0.3;
  Hyperparameters hyper;
};

struct InferArgs {
  std::string model, soundscape, taxonomy, out;
};

struct ProjectArgs {
  std::string dataset, species, where, out;
};

struct NoCallArgs {
  std::string dataset;
  double threshold = 0.5;
  int top_n = 0;
  std::uint64_t seed = 0;
};

struct SynthArgs {
  std::string out;
  SyntheticCorpusOptions options;
};

struct SoundscapeArgs {
  std::string out;
  SoundscapeOptions options;
};

int cmd_build(const BuildArgs& a) {
  BuildConfig config;
  config.out = a.out;
  config.version = a.version;
  config.seed = a.seed;
  config.chunk_threshold_s = a.chunk_threshold;
  config.selector = parse_selector(a.selector);
  config.policy.kind = parse_policy(a.policy);
  config.policy.threshold = a.threshold;
  config.taxonomy = a.taxonomy;
  config.validate();
  const auto corpus = load_corpus(a.corpus);
  const RunReport report = run_build(corpus, config, a.workers, !a.no_resume);
  std::cout << report.summary() << '\n';
  if (!report.ok()) {
    std::cerr << "failed tasks:\n";
    for (const auto& id : report.failed) {
      auto it = report.errors.find(id);
      std::cerr << "  " << id << ": " << (it == report.errors.end() ? "failed" : it->second) << '\n';
    }
    return 2;
  }
  std::cout << "dataset: " << BuildLayout{config.out}.dataset_dir(config.version).string() << '\n';
  return 0;
}

std::string params_line(ModelKind kind, const Hyperparameters& h) {
  switch (kind) {
    case ModelKind::Cnb: return "alpha=" + format_number(h.alpha);
    case ModelKind::Mlp: return "lr=" + format_number(h.lr) + " hidden=" + std::to_string(h.hidden);
    default: return "l2=" + format_number(h.l2);
  }
}

int cmd_train(const TrainArgs& a) {
  TrainOptions options;
  options.variant = parse_variant(a.variant);
  options.model = parse_model_kind(a.model);
  check_compatible(options.model, options.variant);
  if (a.search < 0) throw ValidationError("--search must be >= 0");
  options.search_budget = a.search;
  options.seed = a.seed;
  options.validation_fraction = a.validation;
  options.hyper = a.hyper;
  if (!a.selector.empty()) options.selector = parse_selector(a.selector);
  const Dataset dataset = load_dataset(a.dataset);
  if (!a.policy.empty()) {
    LabelPolicy policy = LabelingConfig::from_manifest(dataset.manifest).policy;
    policy.kind = parse_policy(a.policy);
    options.policy = policy;
  }
  const TrainResult result = train_model(dataset, options);
  const fs::path out = a.out;
  models::save_model(out, result.model);
  const fs::path metrics = a.metrics.empty() ? fs::path(out.string() + ".metrics.json") : fs::path(a.metrics);
  atomic_write_bytes(metrics, result.report().dump(2) + "\n");
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';

  std::cout << "rows: " << result.train_rows << " train / " << result.validation_rows << " validation\n";
  std::cout << "training accuracy: " << format_number(result.training.accuracy) << '\n';
  if (result.validation) {
    std::cout << "validation accuracy: " << format_number(result.validation->accuracy) << '\n';
    std::cout << "validation macro-precision: " << format_number(result.validation->macro_precision) << '\n';
  }
  if (result.search) {
    const fs::path trials = a.trials.empty() ? fs::path(out.string() + ".trials.csv") : fs::path(a.trials);
    result.search->write_csv(trials, "macro_precision");
    std::cout << "best params: " << params_line(options.model, result.chosen) << " (trial " << result.search->best_trial
              << ", mean macro_precision " << format_number(result.search->best_score) << ")\n";
  } else {
    std::cout << "params: " << params_line(options.model, result.chosen) << '\n';
  }
  std::cout << "model: " << out.string() << '\n' << "metrics: " << metrics.string() << '\n';
  return 0;
}

int cmd_infer(const InferArgs& a) {
  const auto model = models::load_model(a.model);
  const TaxonomyMap taxonomy = load_taxonomy(a.taxonomy);
  const AudioClip clip = read_wav(a.soundscape);
  const Backends backends = make_backends();
  const auto result = infer_soundscape(model, clip, *backends.embedder, taxonomy);
  write_submission(a.out, result);
  std::cout << "rows: " << result.row_ids.size() << ", species columns: " << result.species.size() << '\n';
  return 0;
}

int cmd_project(const ProjectArgs& a) {
  std::vector<Condition> conditions;
  if (!a.where.empty()) conditions = parse_filter(a.where);
  if (!a.species.empty()) {
    const auto codes = split(a.species, ',');
    if (codes.empty()) throw ValidationError("--filter: empty species list");
    conditions.push_back({"species", Condition::Op::In, codes});
  }
  const Dataset dataset = load_dataset(a.dataset);
  const Projection p = project_dataset(dataset, conditions, a.out);
  std::cout << "rows: " << p.coords.rows() << ", explained variance: " << format_number(p.variance[0]) << ", "
            << format_number(p.variance[1]) << '\n';
  return 0;
}

int cmd_nocall(const NoCallArgs& a) {
  const Dataset dataset = load_dataset(a.dataset);
  std::cout << nocall_report(dataset, a.threshold, a.top_n, a.seed).text();
  return 0;
}

int cmd_synth(const SynthArgs& a) {
  const auto tracks = write_synthetic_corpus(a.out, a.options);
  std::cout << "tracks: " << tracks.size() << ", corpus: " << (fs::path(a.out) / "corpus.csv").string() << '\n';
  return 0;
}

int cmd_soundscape(const SoundscapeArgs& a) {
  const fs::path out = a.out;
  write_wav(out, synth_soundscape(out.stem().string(), a.options), WavEncoding::Pcm16);
  std::cout << "soundscape: " << out.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Bird-call embedding dataset builder, trainer and soundscape scorer"};
  app.set_config("--config", "", "Read flags from a key=value (TOML/INI) file; use [subcommand] sections");
  app.require_subcommand(1);
  int status = 0;

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Chunk, separate, embed, annotate and consolidate a corpus into a dataset");
  b->add_option("--corpus", build.corpus, "Corpus manifest CSV: track_stem,wav_path,primary_label,secondary_labels")
      ->required();
  b->add_option("--out", build.out, "Output directory (work/, dataset/, report.json)")->required();
  b->add_option("--version", build.version, "Dataset version name")->capture_default_str();
  b->add_option("--workers", build.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--seed", build.seed, "Seed for padding noise")->capture_default_str();
  b->add_option("--selector", build.selector,
                "Channel selector: max_energy, max_positive_classifications, original_plus_best")
      ->capture_default_str();
  b->add_option("--policy", build.policy,
                "Label policy: threshold_primary, multilabel_primary_secondary, metadata_filtered")
      ->capture_default_str();
  b->add_option("--threshold", build.threshold, "Confidence threshold for labeling, in (0, 1)")->capture_default_str();
  b->add_option("--chunk-seconds", build.chunk_threshold, "Chunking threshold in seconds")->capture_default_str();
  b->add_option("--taxonomy", build.taxonomy,
                "Taxonomy CSV backend_class_index,backend_label,species_code (default: synthetic)");
  b->add_flag("--no-resume", build.no_resume, "Re-run every task even when outputs are up to date");
  b->callback([&] { status = cmd_build(build); });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a classifier on a dataset and report held-out metrics");
  t->add_option("--dataset", train.dataset, "Dataset directory (contains manifest.json)")->required();
  t->add_option("--variant", train.variant, "Feature variant: M1, M2, M3, M4, concat5s, logit_softmax")
      ->capture_default_str();
  t->add_option("--model", train.model, "Model family: logreg, cnb, mlp, ovr, stack")->capture_default_str();
  t->add_option("--search", train.search, "Random-search budget (0: use the given hyperparameters)")
      ->capture_default_str();
  t->add_option("--out", train.out, "Model file to write")->required();
  t->add_option("--metrics", train.metrics, "Metrics JSON path (default: <out>.metrics.json)");
  t->add_option("--trials", train.trials, "Search trials CSV path (default: <out>.trials.csv)");
  t->add_option("--seed", train.seed, "Seed for the split, search and MLP")->capture_default_str();
  t->add_option("--validation-fraction", train.validation, "Fraction of tracks per label held out")
      ->capture_default_str();
  t->add_option("--selector", train.selector, "Override the dataset's channel selector");
  t->add_option("--policy", train.policy, "Override the dataset's label policy");
  t->add_option("--l2", train.hyper.l2, "L2 penalty (logreg, ovr, stack)")->capture_default_str();
  t->add_option("--alpha", train.hyper.alpha, "Additive smoothing (cnb)")->capture_default_str();
  t->add_option("--hidden", train.hyper.hidden, "Hidden units (mlp)")->capture_default_str();
  t->add_option("--lr", train.hyper.lr, "Learning rate (mlp)")->capture_default_str();
  t->add_option("--epochs", train.hyper.epochs, "Epochs (mlp)")->capture_default_str();
  t->add_option("--folds", train.hyper.folds, "Folds for search and stacking")->capture_default_str();
  t->callback([&] { status = cmd_train(train); });

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Score each 5 s interval of a soundscape and write a submission CSV");
  i->add_option("--model", infer.model, "Model file from train")->required();
  i->add_option("--soundscape", infer.soundscape, "Soundscape WAV (at least 5 s)")->required();
  i->add_option("--taxonomy", infer.taxonomy, "Taxonomy CSV (default: synthetic, 264 species)");
  i->add_option("--out", infer.out, "Submission CSV: row_id,<species columns>")->required();
  i->callback([&] { status = cmd_infer(infer); });

  ProjectArgs project;
  auto* p = app.add_subcommand("project", "Project dataset embeddings to 2-D with PCA");
  p->add_option("--dataset", project.dataset, "Dataset directory")->required();
  p->add_option("--filter", project.species, "Comma-separated species codes to keep");
  p->add_option("--where", project.where, "Row filter, e.g. 'track_type!=original;start_time>=10'");
  p->add_option("--out", project.out, "CSV: track_name,start_time,label,x,y")->required();
  p->callback([&] { status = cmd_project(project); });

  NoCallArgs nocall;
  auto* n = app.add_subcommand("nocall-report", "Binary call/no-call dataset balance and held-out accuracy");
  n->add_option("--dataset", nocall.dataset, "Dataset directory")->required();
  n->add_option("--threshold", nocall.threshold, "Max-softmax threshold for a positive row")->capture_default_str();
  n->add_option("--top-n", nocall.top_n, "Keep only the N species with the most rows (0: all)")->capture_default_str();
  n->add_option("--seed", nocall.seed, "Seed for the track split")->capture_default_str();
  n->callback([&] { status = cmd_nocall(nocall); });

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic chirp corpus (WAVs and corpus.csv)");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--species", synth.options.species, "Number of species (1-6)")->capture_default_str();
  s->add_option("--tracks-per-species", synth.options.call_tracks_per_species, "Call tracks per species")
      ->capture_default_str();
  s->add_option("--noise-tracks", synth.options.noise_tracks, "Noise-only tracks")->capture_default_str();
  s->add_option("--duration", synth.options.duration_s, "Track duration in seconds")->capture_default_str();
  s->add_option("--seed", synth.options.seed, "Seed")->capture_default_str();
  s->callback([&] { status = cmd_synth(synth); });

  SoundscapeArgs scape;
  auto* sc = app.add_subcommand("synth-soundscape", "Write a synthetic soundscape WAV");
  sc->add_option("--out", scape.out, "Output WAV; its stem becomes the row_id prefix")->required();
  sc->add_option("--duration", scape.options.duration_s, "Duration in seconds")->capture_default_str();
  sc->add_option("--calls", scape.options.calls, "Number of 2 s calls at random times")->capture_default_str();
  sc->add_option("--species", scape.options.species, "Species the calls are drawn from (1-6)")->capture_default_str();
  sc->add_option("--seed", scape.options.seed, "Seed")->capture_default_str();
  sc->callback([&] { status = cmd_soundscape(scape); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const RuntimeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}

}  // namespace embercall
