#pragma once

#include <cstdint>

#include "embercall/models/classifier.hpp"

namespace embercall::models {

struct MlpOptions {
  int hidden = 64;
  double lr = 0.05;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

/// One ReLU hidden layer, softmax output.
class MlpModel final : public Classifier {
 public:
  std::string kind() const override { return "mlp"; }
  int num_classes() const override { return static_cast<int>(W2.rows()); }
  int input_dim() const override { return static_cast<int>(W1.cols()); }
  Matrix predict_proba(const Matrix& X) const override;
  Json describe() const override;
  void append_params(std::vector<double>& out) const override;
  static MlpModel restore(const Json& description, std::span<const double>& params);

  Matrix W1;  // hidden x dim
  Vector b1;
  Matrix W2;  // classes x hidden
  Vector b2;
  MlpOptions options;

  std::vector<double> loss_curve;  // mean training loss per epoch; not serialized
};

/// He-initialized network (biases zero) drawn from options.seed.
MlpModel init_mlp(int input_dim, int num_classes, const MlpOptions& options);

struct MlpGradient {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;
};

/// Weighted mean cross-entropy against soft targets, with gradients.
double mlp_objective(const MlpModel& model, const Matrix& X, const Matrix& targets, const Vector& weights,
                     MlpGradient* grad = nullptr);

/// Mini-batch SGD. A non-finite batch loss throws RuntimeError naming the
/// epoch and batch.
MlpModel fit_mlp(const Matrix& X, std::span<const int> y, int num_classes, const MlpOptions& options = {},
                 std::span<const double> weights = {});

}  // namespace embercall::models
