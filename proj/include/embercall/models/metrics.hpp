#pragma once

#include <span>
#include <string>
#include <vector>

#include "embercall/models/classifier.hpp"

namespace embercall::models {

struct ClassReport {
  int label = 0;
  int support = 0;    // true rows
  int predicted = 0;  // predicted rows
  int true_positive = 0;
  double precision = 0.0;  // 0 when nothing was predicted
  double recall = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  /// Unweighted mean precision over every class that occurs in y_true or
  /// y_pred.
  double macro_precision = 0.0;
  std::vector<ClassReport> per_class;  // ascending label

  Json to_json(std::span<const std::string> class_names = {}) const;
};

Metrics evaluate(std::span<const int> y_true, std::span<const int> y_pred);

/// "predicted 77.3% of the samples as having no birdcalls" for binary
/// predictions where 0 means no call.
std::string nocall_prediction_report(std::span<const int> y_pred);

}  // namespace embercall::models
