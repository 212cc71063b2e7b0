#pragma once

#include <cmath>
#include <string>

#include "embercall/models/classifier.hpp"

namespace embercall::models {

/// Complement naive Bayes over nonnegative features.
class CnbModel final : public Classifier {
 public:
  std::string kind() const override { return "cnb"; }
  int num_classes() const override { return static_cast<int>(w.rows()); }
  int input_dim() const override { return static_cast<int>(w.cols()); }
  /// -X w^T, one score per class; the prediction is the argmax.
  Matrix scores(const Matrix& X) const;
  /// Softmax of the scores.
  Matrix predict_proba(const Matrix& X) const override;
  Json describe() const override;
  void append_params(std::vector<double>& out) const override;
  static CnbModel restore(const Json& description, std::span<const double>& params);

  Matrix w;  // classes x dim, each row L2-normalized log complement weights
  double alpha = 1.0;
};

/// Fits from any range of rows (each a range of doubles) in a single pass.
///
/// theta_ci = (alpha + sum_{j: y_j != c} x_ji) / (alpha * dim + sum_{j: y_j != c} sum_i x_ji),
/// w_ci = log theta_ci, then each w_c is scaled to unit L2 norm.
template <class Rows>
CnbModel fit_cnb(const Rows& X, std::span<const int> y, int num_classes, double alpha = 1.0,
                 std::span<const double> weights = {}) {
  if (!(alpha > 0.0)) throw ValidationError("cnb: alpha must be > 0");
  if (num_classes < 2) throw ValidationError("cnb: need at least two classes");
  if (!weights.empty() && weights.size() != y.size()) throw ValidationError("cnb: weights and y differ in length");

  std::vector<double> per_class;  // num_classes x dim feature sums
  std::size_t dim = 0;
  std::size_t n = 0;
  for (const auto& row : X) {
    if (n >= y.size()) throw ValidationError("cnb: more rows than labels");
    const int c = y[n];
    if (c < 0 || c >= num_classes) throw ValidationError("cnb: label " + std::to_string(c) + " out of range");
    const double sw = weights.empty() ? 1.0 : weights[n];
    std::size_t i = 0;
    for (double v : row) {
      if (n == 0) per_class.resize(per_class.size() + static_cast<std::size_t>(num_classes), 0.0);
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ValidationError("complement NB requires nonnegative features (row " + std::to_string(n) + ", column " +
                              std::to_string(i) + " is " + std::to_string(v) + ")");
      if (n > 0 && i >= dim) throw ValidationError("cnb: rows have different dimensions");
      per_class[i * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(c)] += sw * v;
      ++i;
    }
    if (n == 0) dim = i;
    if (i != dim) throw ValidationError("cnb: rows have different dimensions");
    ++n;
  }
  if (n == 0) throw ValidationError("cnb: no training rows");
  if (n != y.size()) throw ValidationError("cnb: fewer rows than labels");

  const auto C = static_cast<std::size_t>(num_classes);
  std::vector<double> total(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t c = 0; c < C; ++c) total[i] += per_class[i * C + c];

  CnbModel m;
  m.alpha = alpha;
  m.w.resize(num_classes, static_cast<Eigen::Index>(dim));
  std::vector<double> complement(dim);
  for (std::size_t c = 0; c < C; ++c) {
    double denom = alpha * static_cast<double>(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      complement[i] = total[i] - per_class[i * C + c];
      denom += complement[i];
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double wi = std::log((alpha + complement[i]) / denom);
      m.w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = wi;
      norm2 += wi * wi;
    }
    const double norm = std::sqrt(norm2);
    if (norm > 0.0)
      for (std::size_t i = 0; i < dim; ++i) m.w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) /= norm;
  }
  return m;
}

/// Matrix rows as a range, for fit_cnb.
CnbModel fit_cnb(const Matrix& X, std::span<const int> y, int num_classes, double alpha = 1.0,
                 std::span<const double> weights = {});

}  // namespace embercall::models
