#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "embercall/models/classifier.hpp"

namespace embercall::models {

/// Fold index per row: distinct groups are shuffled with `seed` and dealt
/// round-robin, so no group straddles two folds.
std::vector<int> group_kfold(std::span<const std::string> groups, int folds, std::uint64_t seed);

/// Fold index per row: each class's rows are shuffled and dealt round-robin.
std::vector<int> stratified_kfold(std::span<const int> y, int folds, std::uint64_t seed);

struct ParamRange {
  std::string name;
  double low = 0.0;
  double high = 1.0;
  bool log_scale = false;
  bool integer = false;  // rounded after drawing
};

struct SearchSpec {
  std::vector<ParamRange> ranges;
  int budget = 10;
  std::uint64_t seed = 0;
  int folds = 3;
  std::string objective = "macro_precision";

  void validate() const;
};

using Params = std::map<std::string, double>;

struct Trial {
  int index = 0;
  Params params;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
  std::optional<std::string> error;
};

struct SearchResult {
  Params best;
  double best_score = 0.0;
  int best_trial = -1;
  std::vector<Trial> trials;

  /// `trial,<param columns>,mean_<objective>,fold_scores,error`.
  void write_csv(const fs::path& path, const std::string& objective) const;
};

/// Scores one parameter draw on one held-out fold; higher is better.
using FoldObjective = std::function<double(const Params& params, int fold)>;

/// Draws every parameter independently (uniform or log-uniform), evaluates
/// each draw on all folds, and returns the draw with the best mean. A trial
/// that throws is logged and skipped; if all trials fail, throws
/// RuntimeError listing their errors. The trial sequence depends only on the
/// spec.
SearchResult random_search(const SearchSpec& spec, const FoldObjective& objective);

}  // namespace embercall::models
