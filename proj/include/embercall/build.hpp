#pragma once

#include <memory>
#include <string>
#include <vector>

#include "embercall/annotation.hpp"
#include "embercall/pipeline.hpp"

namespace embercall {

struct CorpusTrack {
  std::string track_stem;
  fs::path wav_path;
  std::string primary_label;
  std::vector<std::string> secondary_labels;
};

/// CSV `track_stem,wav_path,primary_label,secondary_labels` with a header
/// row; secondaries are space-separated; relative paths resolve against the
/// manifest's directory. Duplicate stems and stems containing "_part" are
/// rejected.
std::vector<CorpusTrack> load_corpus(const fs::path& path);
void save_corpus(const fs::path& path, std::span<const CorpusTrack> tracks);

struct BuildConfig {
  fs::path out;
  std::string version = "emb_v4";
  std::uint64_t seed = 0;
  int num_sources = kDefaultNumSources;
  double chunk_threshold_s = 180.0;
  float noise_amplitude = 1e-3f;
  ChannelSelectorKind selector = ChannelSelectorKind::MaxEnergy;
  LabelPolicy policy;
  fs::path taxonomy;  // empty: synthetic taxonomy

  void validate() const;
  /// Recorded in the dataset manifest.
  nlohmann::json to_json(const Backends& backends) const;
};

/// Output locations under BuildConfig::out.
struct BuildLayout {
  fs::path root;
  fs::path work() const { return root / "work"; }
  fs::path chunk_wav(const std::string& chunk) const { return work() / "chunks" / (chunk + ".wav"); }
  fs::path source_wav(const std::string& chunk, std::size_t k) const;
  fs::path embedding(const std::string& chunk, const std::string& track_type) const;
  fs::path annotation(const std::string& chunk) const { return work() / "annotations" / (chunk + ".ndjson"); }
  fs::path shard(const std::string& chunk) const { return work() / "shards" / (chunk + ".ndjson"); }
  fs::path dataset_dir(const std::string& version) const { return root / "dataset" / version; }
  fs::path state_file() const { return work() / "state.json"; }
  fs::path report_file() const { return root / "report.json"; }
};

/// Task graph for the corpus: per track a chunk task; per chunk separate,
/// embed (original and every source), annotate and shard tasks; one
/// consolidate task over all shards. Chunk counts come from the WAV headers.
TaskGraph plan_build(std::span<const CorpusTrack> corpus, const BuildConfig& config,
                     std::shared_ptr<const Backends> backends, std::shared_ptr<const TaxonomyMap> taxonomy);

/// Plans, executes with `workers` threads, and writes report.json.
RunReport run_build(std::span<const CorpusTrack> corpus, const BuildConfig& config, int workers, bool resume = true);

/// Loads the configured taxonomy, or the synthetic one.
TaxonomyMap load_taxonomy(const fs::path& path);

}  // namespace embercall
