#include "embercall/models/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace embercall::models {

std::vector<int> group_kfold(std::span<const std::string> groups, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("k-fold: need at least 2 folds");
  std::set<std::string> distinct(groups.begin(), groups.end());
  if (distinct.size() < static_cast<std::size_t>(folds))
    throw ValidationError("k-fold: " + std::to_string(distinct.size()) + " groups cannot fill " + std::to_string(folds) +
                          " folds");
  std::vector<std::string> order(distinct.begin(), distinct.end());
  Rng rng(seed);
  rng.shuffle(order);
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  std::vector<int> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(fold_of[g]);
  return out;
}

std::vector<int> stratified_kfold(std::span<const int> y, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("k-fold: need at least 2 folds");
  if (y.size() < static_cast<std::size_t>(folds)) throw ValidationError("k-fold: fewer rows than folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  Rng rng(seed);
  std::vector<int> out(y.size(), 0);
  std::size_t dealt = 0;  // continue dealing across classes so folds stay balanced
  for (auto& [c, rows] : by_class) {
    rng.shuffle(rows);
    for (std::size_t r : rows) out[r] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return out;
}

void SearchSpec::validate() const {
  if (budget < 1) throw ValidationError("search: budget must be >= 1");
  if (folds < 2) throw ValidationError("search: folds must be >= 2");
  for (const auto& r : ranges) {
    if (!(r.low <= r.high)) throw ValidationError("search: empty range for " + r.name);
    if (r.log_scale && !(r.low > 0.0)) throw ValidationError("search: log range for " + r.name + " must be positive");
  }
}

void SearchResult::write_csv(const fs::path& path, const std::string& objective) const {
  std::vector<std::string> names;
  if (!trials.empty())
    for (const auto& [name, value] : trials.front().params) names.push_back(name);
  atomic_write(path, [&](std::ostream& out) {
    out << "trial";
    for (const auto& n : names) out << ',' << csv_escape(n);
    out << ",mean_" << objective << ",fold_scores,error\n";
    for (const auto& t : trials) {
      out << t.index;
      for (const auto& n : names) out << ',' << format_number(t.params.at(n));
      out << ',' << (t.error ? "" : format_number(t.mean_score)) << ',';
      std::string scores;
      for (double s : t.fold_scores) scores += (scores.empty() ? "" : " ") + format_number(s);
      out << csv_escape(scores) << ',' << csv_escape(t.error.value_or("")) << '\n';
    }
  });
}

SearchResult random_search(const SearchSpec& spec, const FoldObjective& objective) {
  spec.validate();
  Rng rng(spec.seed);
  SearchResult result;
  for (int t = 0; t < spec.budget; ++t) {
    Trial trial;
    trial.index = t;
    for (const auto& r : spec.ranges) {
      const double u = rng.uniform();
      double v = r.log_scale ? std::exp(std::log(r.low) + u * (std::log(r.high) - std::log(r.low)))
                             : r.low + u * (r.high - r.low);
      if (r.integer) v = std::round(v);
      trial.params[r.name] = v;
    }
    try {
      for (int f = 0; f < spec.folds; ++f) {
        const double s = objective(trial.params, f);
        if (!std::isfinite(s)) throw RuntimeError("objective is not finite on fold " + std::to_string(f));
        trial.fold_scores.push_back(s);
      }
      double sum = 0.0;
      for (double s : trial.fold_scores) sum += s;
      trial.mean_score = sum / static_cast<double>(trial.fold_scores.size());
      if (result.best_trial < 0 || trial.mean_score > result.best_score) {
        result.best_trial = t;
        result.best_score = trial.mean_score;
        result.best = trial.params;
      }
    } catch (const std::exception& e) {
      trial.error = e.what();
    }
    result.trials.push_back(std::move(trial));
  }
  if (result.best_trial < 0) {
    std::string msg = "search: all " + std::to_string(spec.budget) + " trials failed";
    for (const auto& t : result.trials) msg += "\n  trial " + std::to_string(t.index) + ": " + t.error.value_or("");
    throw RuntimeError(msg);
  }
  return result;
}

}  // namespace embercall::models
