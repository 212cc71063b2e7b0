#include <catch_amalgamated.hpp>
#include <cstdlib>

#include "embercall/backends.hpp"
#include "support.hpp"

using namespace embercall;
using Catch::Approx;

namespace {

double max_mixture_error(const AudioClip& clip, const SeparationResult& r) {
  double worst = 0.0;
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    double sum = 0.0;
    for (const auto& s : r.sources) sum += s.samples[i];
    worst = std::max(worst, std::fabs(sum - clip.samples[i]));
  }
  return worst;
}

double l2_distance(const std::vector<float>& a, const std::vector<float>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d);
}

}  // namespace

TEST_CASE("softmax", "[backends]") {
  const auto half = softmax(std::vector<double>{0.0, 0.0});
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  const auto big = softmax(std::vector<double>{1000.0, 1000.0, 999.0});
  for (double p : big) CHECK(std::isfinite(p));
  CHECK(big[0] == big[1]);
  CHECK(big[0] > big[2]);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(20);
    for (auto& v : x) v = rng.uniform(-30, 30);
    const double c = rng.uniform(-500, 500);
    std::vector<double> shifted = x;
    for (auto& v : shifted) v += c;
    const auto p = softmax(x);
    const auto q = softmax(shifted);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] >= 0.0);
      CHECK(p[i] == Approx(q[i]).margin(1e-12));
      total += p[i];
    }
    CHECK(total == Approx(1.0).margin(1e-9));
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == std::max_element(x.begin(), x.end()) - x.begin());
  }
}

TEST_CASE("source names", "[backends]") {
  SeparationResult r;
  r.sources.resize(4);
  CHECK(source_name(2) == "source2");
  CHECK(r.source_index_of("source3") == 3);
  CHECK_THROWS_AS(r.source_index_of("source4"), ValidationError);
  CHECK_THROWS_AS(r.source_index_of("original"), ValidationError);
}

TEST_CASE("synthetic separator is mixture consistent", "[backends][property]") {
  const SyntheticSeparator sep;
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1000 + rng.index(40000);
    const auto clip = test::noise_clip(n, kSeparatorRate, rng.next(), 0.9);
    for (int sources : {4, 8}) {
      const auto r = sep.separate(clip, sources);
      REQUIRE(r.sources.size() == static_cast<std::size_t>(sources));
      for (const auto& s : r.sources) {
        CHECK(s.samples.size() == n);
        CHECK(s.sample_rate == kSeparatorRate);
      }
      CHECK(max_mixture_error(clip, r) < 1e-6);
    }
  }
}

TEST_CASE("synthetic separator edge cases", "[backends]") {
  const SyntheticSeparator sep;
  AudioClip silence;
  silence.sample_rate = kSeparatorRate;
  silence.samples.assign(32000, 0.0f);
  for (const auto& s : sep.separate(silence, 4).sources)
    for (float v : s.samples) CHECK(v == 0.0f);
  CHECK_THROWS_AS(sep.separate(silence, 3), ValidationError);
  auto wrong_rate = silence;
  wrong_rate.sample_rate = 48000;
  CHECK_THROWS_AS(sep.separate(wrong_rate, 4), ValidationError);
}

TEST_CASE("a tone inside band k lands in source k", "[backends]") {
  const SyntheticSeparator sep;
  const auto edges = SyntheticSeparator::band_edges(4, kSeparatorRate);
  REQUIRE(edges.size() == 5);
  for (int k = 0; k < 4; ++k) {
    const double hz = 0.5 * (edges[k] + edges[k + 1]);
    const auto tone = test::tone_clip(1.0, kSeparatorRate, hz);
    const auto r = sep.separate(tone, 4);
    double total = 0.0;
    for (const auto& s : r.sources) total += energy(s.samples);
    CHECK(energy(r.sources[static_cast<std::size_t>(k)].samples) >= 0.95 * total);
  }
}

TEST_CASE("synthetic embedder shapes and determinism", "[backends]") {
  const SyntheticEmbedder emb;
  CHECK(emb.embed_dim() == 320);
  CHECK(emb.class_dim() == 3337);
  auto clip = test::noise_clip(static_cast<std::size_t>(12) * kEmbedderRate, kEmbedderRate, 3, 0.1);
  // Make seconds 6..9 a copy of seconds 0..3.
  std::copy_n(clip.samples.begin(), 3 * kEmbedderRate, clip.samples.begin() + 6 * kEmbedderRate);
  const auto out = emb.embed_windows(clip);
  REQUIRE(out.size() == 10);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].start_time == static_cast<int>(i));
    CHECK(out[i].embedding.size() == 320);
    CHECK(out[i].logits.size() == 3337);
    for (float v : out[i].embedding) CHECK(std::isfinite(v));
  }
  CHECK(out[0].embedding == out[6].embedding);
  CHECK(out[0].logits == out[6].logits);
  CHECK(emb.embed_windows(clip)[3].embedding == out[3].embedding);

  clip.samples.resize(2 * kEmbedderRate);
  CHECK_THROWS_AS(emb.embed_windows(clip), ValidationError);
}

TEST_CASE("synthetic embedder counts windows of a 102 s clip", "[backends]") {
  const SyntheticEmbedder emb;
  const auto clip = test::noise_clip(static_cast<std::size_t>(102) * kEmbedderRate, kEmbedderRate, 5, 0.1);
  const auto out = emb.embed_windows(clip);
  REQUIRE(out.size() == 100);
  CHECK(out.back().start_time == 99);
}

TEST_CASE("synthetic embedder responds smoothly to small noise", "[backends][property]") {
  const SyntheticEmbedder emb;
  const auto base = test::tone_clip(3.0, kEmbedderRate, 5000.0, 0.3);
  const auto ref = emb.embed_windows(base)[0].embedding;
  double previous = 0.0;
  for (double eps : {1e-4, 1e-3, 1e-2}) {
    auto noisy = base;
    const auto noise = test::noise_clip(noisy.samples.size(), kEmbedderRate, 21, eps);
    for (std::size_t i = 0; i < noisy.samples.size(); ++i) noisy.samples[i] += noise.samples[i];
    const double d = l2_distance(emb.embed_windows(noisy)[0].embedding, ref);
    CHECK(d > previous);
    previous = d;
  }
}

TEST_CASE("a tone in embedder band k gives a confident class-k prediction", "[backends]") {
  const SyntheticEmbedder emb;
  for (int band : {3, 15, 25}) {
    const double hz = SyntheticEmbedder::band_low_hz(band) + SyntheticEmbedder::band_width_hz() / 2;
    const auto out = emb.embed_windows(test::tone_clip(3.0, kEmbedderRate, hz, 0.3))[0];
    const auto p = softmax(out.logits);
    const auto top = std::max_element(p.begin(), p.end()) - p.begin();
    CHECK(top == band);
    CHECK(p[static_cast<std::size_t>(top)] > 0.5);
  }
  const auto noise = emb.embed_windows(test::noise_clip(3 * kEmbedderRate, kEmbedderRate, 2, 0.3))[0];
  CHECK(max_probability(noise.logits) < 0.5);
}

TEST_CASE("taxonomy", "[backends]") {
  const auto tax = TaxonomyMap::synthetic();
  CHECK(tax.size() == 3337);
  CHECK(tax.species().size() == 264);
  CHECK(tax.species_of(0) == std::optional<std::string>("syn000"));
  CHECK_FALSE(tax.species_of(3000).has_value());
  CHECK(tax.has_species("syn263"));
  CHECK_FALSE(tax.has_species("syn264"));

  test::TempDir dir("tax");
  tax.save_csv(dir / "t.csv");
  const auto back = TaxonomyMap::load_csv(dir / "t.csv");
  CHECK(back.species() == tax.species());
  CHECK(back.label_of(17) == tax.label_of(17));
}

TEST_CASE("embed protocol lines round-trip", "[backends]") {
  EmbedderOutput o;
  o.start_time = 7;
  o.embedding = {0.1f, -2.5f, 3e-8f};
  o.logits = {1.0f, 0.0f};
  const auto back = decode_embedder_output(encode_embedder_output(o), 3, 2);
  CHECK(back.start_time == 7);
  CHECK(back.embedding == o.embedding);
  CHECK(back.logits == o.logits);
  CHECK_THROWS_AS(decode_embedder_output(encode_embedder_output(o), 4, 2), ValidationError);
}

#ifdef EMBERCALL_FAKE_BACKEND
TEST_CASE("subprocess backends match the synthetic ones", "[backends][subprocess]") {
  const SubprocessSeparator sep(EMBERCALL_FAKE_BACKEND);
  const SubprocessEmbedder emb(EMBERCALL_FAKE_BACKEND);
  const auto clip = test::noise_clip(4 * kSeparatorRate, kSeparatorRate, 8, 0.3, "probe");
  const auto r = sep.separate(clip, 4);
  const auto local = SyntheticSeparator().separate(clip, 4);
  REQUIRE(r.sources.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(r.sources[k].samples == local.sources[k].samples);

  const auto at48 = resample(clip, kEmbedderRate);
  const auto remote = emb.embed_windows(at48);
  const auto direct = SyntheticEmbedder().embed_windows(at48);
  REQUIRE(remote.size() == direct.size());
  CHECK(remote[1].embedding == direct[1].embedding);
  CHECK(remote[1].logits == direct[1].logits);
}

TEST_CASE("subprocess failures carry the backend's diagnostics", "[backends][subprocess]") {
  ::setenv("EMBERCALL_FAKE_FAIL", "embed", 1);
  const SubprocessEmbedder emb(EMBERCALL_FAKE_BACKEND);
  const auto clip = test::noise_clip(3 * kEmbedderRate, kEmbedderRate, 8);
  try {
    emb.embed_windows(clip);
    FAIL("expected a failure");
  } catch (const RuntimeError& e) {
    CHECK(std::string(e.what()).find("simulated embed failure") != std::string::npos);
  }
  ::unsetenv("EMBERCALL_FAKE_FAIL");
  CHECK_THROWS_AS(SubprocessEmbedder("/nonexistent/backend").embed_windows(clip), RuntimeError);
}
#endif
