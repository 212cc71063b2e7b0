#pragma once

#include <optional>

#include "embercall/models/linear.hpp"

namespace embercall::models {

/// One binary logistic model per class. Probabilities are independent per
/// class and are not normalized across classes.
class OvrModel final : public Classifier {
 public:
  std::string kind() const override { return "ovr"; }
  int num_classes() const override { return static_cast<int>(per_class.size()); }
  int input_dim() const override { return dim; }
  Matrix predict_proba(const Matrix& X) const override;
  Json describe() const override;
  void append_params(std::vector<double>& out) const override;
  static OvrModel restore(const Json& description, std::span<const double>& params);

  /// nullopt: the class had no positives (predicts 0) or only positives
  /// (predicts 1, see always_positive).
  std::vector<std::optional<LinearModel>> per_class;
  std::vector<int> always_positive;
  std::vector<int> skipped;  // classes without positives
  int dim = 0;
  double l2 = 0.0;
};

/// `labels[j]` lists the classes row j belongs to.
OvrModel fit_ovr(const Matrix& X, std::span<const std::vector<int>> labels, int num_classes,
                 const LogregOptions& options = {}, std::span<const double> weights = {});

}  // namespace embercall::models
