#include "embercall/models/classifier.hpp"

#include <cmath>

namespace embercall::models {

std::vector<int> argmax_rows(const Matrix& P) {
  std::vector<int> out(static_cast<std::size_t>(P.rows()), 0);
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < P.cols(); ++c)
      if (P(i, c) > P(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Matrix to_matrix(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return Matrix(0, 0);
  const auto dim = rows.front().size();
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) throw ValidationError("feature rows have different dimensions");
    for (std::size_t j = 0; j < dim; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return X;
}

void check_input(const Matrix& X, int expected, std::string_view who) {
  if (X.cols() != expected)
    throw ValidationError(std::string(who) + ": expected " + std::to_string(expected) + " features, got " +
                          std::to_string(X.cols()));
}

void check_labels(const Matrix& X, std::span<const int> y, int num_classes, std::span<const double> weights,
                  std::string_view who) {
  const std::string w(who);
  if (X.rows() == 0) throw ValidationError(w + ": no training rows");
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw ValidationError(w + ": X and y differ in length");
  if (!weights.empty() && weights.size() != y.size()) throw ValidationError(w + ": weights and y differ in length");
  if (num_classes < 1) throw ValidationError(w + ": need at least one class");
  if (!X.allFinite()) throw ValidationError(w + ": non-finite feature value");
  for (int label : y)
    if (label < 0 || label >= num_classes)
      throw ValidationError(w + ": label " + std::to_string(label) + " out of range [0, " + std::to_string(num_classes) + ")");
  for (double v : weights)
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(w + ": sample weights must be positive and finite");
}

std::span<const double> take(std::span<const double>& params, std::size_t n, std::string_view who) {
  if (params.size() < n) throw ValidationError(std::string(who) + ": parameter block too short");
  auto head = params.first(n);
  params = params.subspan(n);
  return head;
}

}  // namespace embercall::models
