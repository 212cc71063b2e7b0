#include "embercall/models/metrics.hpp"

#include <cstdio>
#include <map>

namespace embercall::models {

Metrics evaluate(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size())
    throw ValidationError("metrics: " + std::to_string(y_true.size()) + " labels vs " + std::to_string(y_pred.size()) +
                          " predictions");
  if (y_true.empty()) throw ValidationError("metrics: no rows");
  std::map<int, ClassReport> by_class;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    auto& t = by_class[y_true[i]];
    t.label = y_true[i];
    ++t.support;
    auto& p = by_class[y_pred[i]];
    p.label = y_pred[i];
    ++p.predicted;
    if (y_true[i] == y_pred[i]) {
      ++correct;
      ++p.true_positive;
    }
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
  double sum = 0.0;
  for (auto& [label, r] : by_class) {
    r.precision = r.predicted ? static_cast<double>(r.true_positive) / r.predicted : 0.0;
    r.recall = r.support ? static_cast<double>(r.true_positive) / r.support : 0.0;
    sum += r.precision;
    m.per_class.push_back(r);
  }
  m.macro_precision = sum / static_cast<double>(m.per_class.size());
  return m;
}

Json Metrics::to_json(std::span<const std::string> class_names) const {
  Json classes = Json::array();
  for (const auto& r : per_class) {
    Json c = {{"label", r.label},
              {"support", r.support},
              {"predicted", r.predicted},
              {"true_positive", r.true_positive},
              {"precision", r.precision},
              {"recall", r.recall}};
    if (r.label >= 0 && static_cast<std::size_t>(r.label) < class_names.size()) c["name"] = class_names[r.label];
    classes.push_back(std::move(c));
  }
  return {{"accuracy", accuracy}, {"macro_precision", macro_precision}, {"per_class", classes}};
}

std::string nocall_prediction_report(std::span<const int> y_pred) {
  if (y_pred.empty()) throw ValidationError("metrics: no predictions");
  std::size_t none = 0;
  for (int p : y_pred) none += p == 0;
  char buf[96];
  std::snprintf(buf, sizeof buf, "predicted %.1f%% of the samples as having no birdcalls",
                100.0 * static_cast<double>(none) / static_cast<double>(y_pred.size()));
  return buf;
}

}  // namespace embercall::models
