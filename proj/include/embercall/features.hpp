#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embercall/annotation.hpp"

namespace embercall {

/// Model input variants. M1..M4 combine the current token with the next token
/// and/or the track aggregate; concat5s joins the two tokens of a 5 s
/// interval; logit_softmax uses the backend's class probabilities.
enum class Variant { M1, M2, M3, M4, Concat5s, LogitSoftmax };

Variant parse_variant(std::string_view s);
std::string to_string(Variant v);
std::size_t feature_dim(Variant v, std::size_t embed_dim = kDefaultEmbedDim, std::size_t class_dim = kDefaultClassDim);

struct FeatureVector {
  std::vector<double> values;
  Variant variant = Variant::M1;
  std::vector<std::string> labels;
  double weight = 1.0;
};

/// One embedding at a whole-second start time.
struct Token {
  int start_time = 0;
  std::span<const float> values;
};

struct IntervalFeature {
  int interval = 0;  // k for [5k, 5k + 5)
  std::vector<double> values;
};

/// Tokens at a 1 s hop -> one vector per fully covered 5 s interval: the mean
/// of the tokens starting at 5k and 5k + 2. Tokens are looked up by start
/// time, not list position. Intervals missing either token are dropped.
std::vector<IntervalFeature> align_5s(std::span<const Token> tokens);
/// Same intervals as align_5s, but v_{5k} ++ v_{5k+2}.
std::vector<IntervalFeature> concat_5s(std::span<const Token> tokens);

/// Arithmetic mean of the tokens.
std::vector<double> track_embedding(std::span<const Token> tokens);

/// M1 = v_t, M2 = v_t ++ v_next, M3 = v_t ++ track, M4 = v_t ++ v_next ++ track.
/// Returns nullopt when the variant needs context that is missing.
std::optional<std::vector<double>> build_context(Variant variant, std::span<const double> current,
                                                 std::optional<std::span<const double>> next,
                                                 std::optional<std::span<const double>> track);

/// Softmax of the logits as a logit_softmax feature.
FeatureVector logit_features(std::span<const float> logits);

/// Synthesizes `count` multi-label examples, each the mean of one token from
/// `group_size` distinct classes. Classes are dealt from a reshuffled deck so
/// they are drawn evenly; tokens within a class are drawn uniformly.
std::vector<FeatureVector> interpolate_groups(const std::map<std::string, std::vector<std::vector<double>>>& tokens_by_class,
                                              int group_size, int count, std::uint64_t seed);

struct ContextStats {
  std::size_t emitted = 0;
  std::size_t missing_next = 0;
};

struct FeatureSet {
  Variant variant = Variant::M1;
  std::vector<FeatureVector> features;
  std::vector<std::string> groups;  // parent track stem of each feature
  ContextStats stats;
};

/// Training features for labeled rows. `rows[i]` carries labels `labels[i]`.
/// Per-row variants (M1..M4, logit_softmax) emit one feature per row;
/// concat5s emits one per 5 s interval, labeled with the union of its two
/// tokens' labels (no-call dropped when a species is present). Weight is
/// 1 / |labels|.
FeatureSet assemble_features(std::span<const EmbeddingRow* const> rows,
                             std::span<const std::vector<std::string>> labels, Variant variant);

/// Inference features for one recording: one vector per 5 s interval. M-variant
/// contexts use interval tokens (next = following interval, the last interval
/// reuses itself; track = mean of all window tokens).
std::vector<std::vector<double>> interval_features(Variant variant, std::span<const EmbedderOutput> windows);

/// Flat matrix file: a JSON header line {"rows","dim","variant"}, then the
/// values row-major as little-endian float64.
void write_feature_matrix(const fs::path& path, std::span<const FeatureVector> features);

}  // namespace embercall
