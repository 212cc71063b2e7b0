#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "embercall/util.hpp"
#include "nlohmann/json.hpp"

namespace embercall::models {

using Json = nlohmann::json;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Common fit/predict contract. A fitted classifier is immutable, so
/// predict_proba may be called concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string kind() const = 0;
  virtual int num_classes() const = 0;
  virtual int input_dim() const = 0;
  /// rows x num_classes. Multinomial models return rows summing to 1;
  /// one-vs-rest returns independent per-class probabilities.
  virtual Matrix predict_proba(const Matrix& X) const = 0;

  /// Kind, shapes and hyperparameters; enough to restore from the parameter
  /// block written by append_params.
  virtual Json describe() const = 0;
  virtual void append_params(std::vector<double>& out) const = 0;
};

/// Rebuilds a classifier from describe() output, consuming its parameters
/// from the front of `params`.
std::unique_ptr<Classifier> restore_classifier(const Json& description, std::span<const double>& params);

/// Row-wise argmax (ties to the lowest index).
std::vector<int> argmax_rows(const Matrix& P);

Matrix to_matrix(std::span<const std::vector<double>> rows);

/// Throws ValidationError unless X has `expected` columns.
void check_input(const Matrix& X, int expected, std::string_view who);

/// Throws ValidationError unless every label is in [0, C) and sizes line up.
void check_labels(const Matrix& X, std::span<const int> y, int num_classes, std::span<const double> weights,
                  std::string_view who);

/// Pops `n` values from the front of `params`.
std::span<const double> take(std::span<const double>& params, std::size_t n, std::string_view who);

}  // namespace embercall::models
