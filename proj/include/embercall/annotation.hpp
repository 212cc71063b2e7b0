#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "embercall/backends.hpp"

namespace embercall {

/// Reserved label for windows without a confident call. Class index 264 in
/// the competition label space (after the 264 species).
inline constexpr const char* kNoCall = "no-call";
inline constexpr int kTopK = 5;
inline constexpr const char* kOriginalTrack = "original";

struct Prediction {
  int rank = 0;
  int index = 0;
  std::string label;
  std::optional<std::string> mapped_species;
  double probability = 0.0;

  bool operator==(const Prediction&) const = default;
};

/// One 3 s window of one channel of one chunk.
struct EmbeddingRow {
  std::string species;     // track's primary label
  std::string track_stem;  // chunk stem, e.g. XC629875_part003
  std::string track_type;  // original | source0..
  std::string track_name;  // {species}/{track_stem}_{track_type}.wav
  std::vector<float> embedding;
  std::vector<float> prediction_vec;  // raw logits
  std::vector<Prediction> predictions;
  int start_time = 0;
  double energy = 0.0;          // of the ORIGINAL chunk's window
  double channel_energy = 0.0;  // of this channel's own window

  bool operator==(const EmbeddingRow&) const = default;
};

std::string make_track_name(std::string_view species, std::string_view track_stem, std::string_view track_type);

/// Top-k softmax predictions, descending probability (ties by class index).
std::vector<Prediction> top_predictions(std::span<const float> logits, const TaxonomyMap& taxonomy, int k = kTopK);

/// Embeddings of one channel plus the mean-square energy of each of its
/// windows, aligned by start time.
struct ChannelEmbeddings {
  std::string track_type;
  std::vector<EmbedderOutput> outputs;
  std::vector<double> window_energy;
};

/// Per-window energies of a clip (3 s window, 1 s hop).
std::vector<double> window_energies(const AudioClip& clip);

/// Rows for every channel, with `energy` taken from `original_energy`.
std::vector<EmbeddingRow> assemble_rows(std::string_view species, std::string_view track_stem,
                                        std::span<const double> original_energy,
                                        std::span<const ChannelEmbeddings> channels, const TaxonomyMap& taxonomy);

/// Resamples and embeds the original chunk and every separated source, then
/// assembles rows. `chunk` must be padded to a multiple of 3 s.
std::vector<EmbeddingRow> annotate_chunk(const AudioClip& chunk, const SeparationResult& sources,
                                         const Embedder& embedder, const TaxonomyMap& taxonomy,
                                         std::string_view species);

enum class ChannelSelectorKind { MaxEnergy, MaxPositiveClassifications, OriginalPlusBest };
enum class LabelPolicyKind { ThresholdPrimary, MultilabelPrimarySecondary, MetadataFiltered };

ChannelSelectorKind parse_selector(std::string_view s);
std::string to_string(ChannelSelectorKind k);
LabelPolicyKind parse_policy(std::string_view s);
std::string to_string(LabelPolicyKind k);

struct LabelPolicy {
  LabelPolicyKind kind = LabelPolicyKind::ThresholdPrimary;
  double threshold = 0.5;

  /// Throws ValidationError unless threshold is in (0, 1).
  void validate() const;
};

/// Indices of the rows kept, in input order. Grouping is by track_stem; each
/// group must contain at least one source channel. `threshold` is only used by
/// MaxPositiveClassifications.
std::vector<std::size_t> select_channel(std::span<const EmbeddingRow> rows, ChannelSelectorKind selector,
                                        double threshold = 0.5);

struct TrackLabels {
  std::string primary;
  std::vector<std::string> secondaries;
};

/// Keyed by the parent track stem (without _partNNN). Lookups accept chunk
/// stems.
class TrackMetadata {
 public:
  void add(std::string track_stem, TrackLabels labels);
  /// Throws ValidationError for an unknown track.
  const TrackLabels& lookup(std::string_view track_stem) const;
  bool contains(std::string_view track_stem) const;
  std::size_t size() const { return tracks_.size(); }
  const std::map<std::string, TrackLabels, std::less<>>& tracks() const { return tracks_; }

  /// CSV `track_stem,primary_label,secondary_labels` (secondaries
  /// space-separated, header optional).
  static TrackMetadata load_csv(const fs::path& path);
  void save_csv(const fs::path& path) const;

 private:
  std::map<std::string, TrackLabels, std::less<>> tracks_;
};

/// Sorted label set; never empty ({no-call} is the fallback).
std::vector<std::string> assign_labels(const EmbeddingRow& row, const LabelPolicy& policy,
                                       const TrackMetadata& metadata);

struct NoCallDataset {
  std::vector<std::size_t> rows;  // indices into the input
  std::vector<int> is_call;       // 1 = call, 0 = no-call
  double positive_fraction = 0.0;

  /// "49.7% positive / 50.3% negative".
  std::string balance_report() const;
};

/// Binary call/no-call labels by max softmax >= threshold. With top_n > 0,
/// only rows of the top_n species with the most rows are kept.
NoCallDataset build_nocall_dataset(std::span<const EmbeddingRow> rows, double threshold, int top_n = 0);

/// "{a}% positive / {b}% negative" with one decimal; the two parts sum to 100.
std::string format_balance(double positive_fraction);

}  // namespace embercall
