#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "embercall/dataset.hpp"
#include "embercall/features.hpp"
#include "embercall/models/metrics.hpp"
#include "embercall/models/search.hpp"
#include "embercall/models/serialize.hpp"

namespace embercall {

enum class ModelKind { Logreg, Cnb, Mlp, Ovr, Stack };

ModelKind parse_model_kind(std::string_view s);
std::string to_string(ModelKind k);

/// Throws ValidationError for pairs that cannot work (cnb needs the
/// nonnegative logit_softmax features).
void check_compatible(ModelKind model, Variant variant);

/// Parent track stems held out for validation. Tracks are grouped by primary
/// label and ordered by a seeded hash of their stem; each group with at least
/// two tracks gives max(1, round(n * fraction)) of them (never all).
std::set<std::string> validation_tracks(const std::map<std::string, std::string>& primary_by_track, double fraction,
                                        std::uint64_t seed);

struct LabelingConfig {
  ChannelSelectorKind selector = ChannelSelectorKind::MaxEnergy;
  LabelPolicy policy;

  /// From the dataset manifest's build config, falling back to defaults.
  static LabelingConfig from_manifest(const DatasetManifest& manifest);
};

/// Selected rows of a dataset with their label sets.
struct LabeledRows {
  std::vector<const EmbeddingRow*> rows;
  std::vector<std::vector<std::string>> labels;
};

LabeledRows label_dataset(const Dataset& dataset, const LabelingConfig& config);

struct Hyperparameters {
  double l2 = 1e-3;
  double alpha = 1.0;
  int hidden = 64;
  double lr = 0.05;
  int epochs = 200;
  int folds = 3;  // stacking and search
};

struct TrainOptions {
  Variant variant = Variant::M1;
  ModelKind model = ModelKind::Logreg;
  int search_budget = 0;
  std::uint64_t seed = 0;
  double validation_fraction = 0.3;
  Hyperparameters hyper;
  std::optional<ChannelSelectorKind> selector;
  std::optional<LabelPolicy> policy;
};

struct TrainResult {
  models::ModelFile model;
  std::optional<models::Metrics> validation;  // absent when nothing was held out
  models::Metrics training;
  std::optional<models::SearchResult> search;
  Hyperparameters chosen;
  std::vector<std::string> warnings;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::vector<std::string> validation_tracks;

  nlohmann::json report() const;
};

/// Labels the dataset, splits by track, assembles features, optionally
/// searches hyperparameters with group k-fold over the training tracks, fits,
/// and evaluates on the held-out tracks.
TrainResult train_model(const Dataset& dataset, const TrainOptions& options);

/// Fits one model family. Multinomial families see each multi-label row as
/// one row per label, weighted by the row's weight; OvR uses the label sets
/// directly.
std::unique_ptr<models::Classifier> fit_model(ModelKind kind, const models::Matrix& X,
                                              std::span<const std::vector<int>> label_sets,
                                              std::span<const double> weights, int num_classes,
                                              const Hyperparameters& hyper, std::uint64_t seed);

/// Argmax predictions scored against label sets: a prediction inside the set
/// counts as correct, otherwise the set's first label is the truth.
models::Metrics evaluate_sets(const models::Matrix& P, std::span<const std::vector<int>> label_sets);

struct NoCallReport {
  NoCallDataset data;
  double accuracy = 0.0;  // held-out
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::string prediction_line;

  std::string text() const;
};

/// Binary call/no-call logistic regression on M1 embeddings of every row,
/// evaluated on held-out tracks.
NoCallReport nocall_report(const Dataset& dataset, double threshold, int top_n, std::uint64_t seed,
                           double validation_fraction = 0.3, double l2 = 1e-3);

}  // namespace embercall
