#pragma once

#include <functional>
#include <memory>

#include "embercall/models/linear.hpp"

namespace embercall::models {

/// Fits one base model. Factories must be deterministic.
using ModelFactory =
    std::function<std::unique_ptr<Classifier>(const Matrix& X, std::span<const int> y, int num_classes,
                                              std::span<const double> weights)>;

struct StackOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  LogregOptions meta;
};

/// Meta logistic regression over the concatenated base probabilities.
class StackedModel final : public Classifier {
 public:
  std::string kind() const override { return "stack"; }
  int num_classes() const override { return meta.num_classes(); }
  int input_dim() const override { return bases.empty() ? 0 : bases.front()->input_dim(); }
  Matrix predict_proba(const Matrix& X) const override;
  /// Base probabilities side by side: the meta model's input.
  Matrix meta_features(const Matrix& X) const;
  Json describe() const override;
  void append_params(std::vector<double>& out) const override;
  static StackedModel restore(const Json& description, std::span<const double>& params);

  std::vector<std::unique_ptr<Classifier>> bases;  // refit on all rows
  LinearModel meta;
  int folds_used = 0;
  std::vector<std::string> warnings;  // not serialized
};

/// Trains the meta model on out-of-fold base predictions, then refits every
/// base on all rows. With `groups`, folds never split a group; otherwise they
/// are stratified by label. A fold whose held-out part lacks a class is merged
/// into its neighbor (with a warning) while more than two folds remain.
StackedModel fit_stack(std::span<const ModelFactory> bases, const Matrix& X, std::span<const int> y, int num_classes,
                       const StackOptions& options = {}, std::span<const double> weights = {},
                       std::span<const std::string> groups = {});

}  // namespace embercall::models
