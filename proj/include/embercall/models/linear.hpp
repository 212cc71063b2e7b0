#pragma once

#include "embercall/models/classifier.hpp"

namespace embercall::models {

struct LogregOptions {
  double l2 = 1e-3;
  int max_iter = 2000;
  double tol = 1e-6;  // on the gradient infinity-norm
};

/// Multinomial logistic regression.
class LinearModel final : public Classifier {
 public:
  LinearModel() = default;
  LinearModel(Matrix weights, Vector bias, double l2) : W(std::move(weights)), b(std::move(bias)), l2(l2) {}

  std::string kind() const override { return "logreg"; }
  int num_classes() const override { return static_cast<int>(W.rows()); }
  int input_dim() const override { return static_cast<int>(W.cols()); }
  Matrix predict_proba(const Matrix& X) const override;
  Matrix decision_function(const Matrix& X) const;
  Json describe() const override;
  void append_params(std::vector<double>& out) const override;
  static LinearModel restore(const Json& description, std::span<const double>& params);

  Matrix W;  // classes x dim
  Vector b;
  double l2 = 0.0;

  // Fit diagnostics; not serialized.
  std::vector<double> loss_trace;  // objective after each accepted step, starting at init
  int iterations = 0;
  bool converged = false;
};

/// Weighted mean softmax cross-entropy against soft targets plus
/// (l2 / 2) * ||W||^2. The bias is not penalized. Gradients are written when
/// the pointers are non-null.
double logreg_objective(const Matrix& X, const Matrix& targets, const Vector& weights, double l2, const Matrix& W,
                        const Vector& b, Matrix* grad_W = nullptr, Vector* grad_b = nullptr);

/// Full-batch gradient descent with Armijo backtracking from zero init. The
/// weight step is scaled by 1 / (1 + l2) so the bias still converges under
/// heavy regularization.
/// `targets` rows are label distributions (one-hot for single-label data).
LinearModel fit_logreg(const Matrix& X, const Matrix& targets, const Vector& weights, const LogregOptions& options = {});
/// Single-label convenience form. Empty weights mean all ones.
LinearModel fit_logreg(const Matrix& X, std::span<const int> y, int num_classes, std::span<const double> weights = {},
                       const LogregOptions& options = {});

Matrix one_hot(std::span<const int> y, int num_classes);

/// Row-wise max-subtracted softmax.
Matrix softmax_rows(const Matrix& Z);

}  // namespace embercall::models
