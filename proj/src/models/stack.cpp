#include "embercall/models/stack.hpp"

#include <algorithm>
#include <set>

#include "embercall/models/search.hpp"

namespace embercall::models {

Matrix StackedModel::meta_features(const Matrix& X) const {
  Eigen::Index width = 0;
  for (const auto& b : bases) width += b->num_classes();
  Matrix F(X.rows(), width);
  Eigen::Index col = 0;
  for (const auto& b : bases) {
    const Matrix P = b->predict_proba(X);
    F.middleCols(col, P.cols()) = P;
    col += P.cols();
  }
  return F;
}

Matrix StackedModel::predict_proba(const Matrix& X) const { return meta.predict_proba(meta_features(X)); }

Json StackedModel::describe() const {
  Json base_desc = Json::array();
  for (const auto& b : bases) base_desc.push_back(b->describe());
  return {{"kind", kind()},   {"classes", num_classes()}, {"dim", input_dim()},
          {"folds", folds_used}, {"bases", base_desc},    {"meta", meta.describe()},
          {"layout", "each base's block in order, then the meta logreg block"}};
}

void StackedModel::append_params(std::vector<double>& out) const {
  for (const auto& b : bases) b->append_params(out);
  meta.append_params(out);
}

StackedModel StackedModel::restore(const Json& d, std::span<const double>& params) {
  StackedModel m;
  m.folds_used = d.at("folds").get<int>();
  for (const auto& b : d.at("bases")) m.bases.push_back(restore_classifier(b, params));
  m.meta = LinearModel::restore(d.at("meta"), params);
  return m;
}

namespace {

Matrix select_rows(const Matrix& X, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

}  // namespace

StackedModel fit_stack(std::span<const ModelFactory> bases, const Matrix& X, std::span<const int> y, int num_classes,
                       const StackOptions& options, std::span<const double> weights, std::span<const std::string> groups) {
  check_labels(X, y, num_classes, weights, "stack");
  if (bases.empty()) throw ValidationError("stack: need at least one base model");
  if (options.folds < 2) throw ValidationError("stack: need at least 2 folds");
  if (!groups.empty() && groups.size() != y.size()) throw ValidationError("stack: groups and y differ in length");

  StackedModel m;
  std::vector<int> fold = groups.empty() ? stratified_kfold(y, options.folds, options.seed)
                                         : group_kfold(groups, options.folds, options.seed);

  // Merge folds whose held-out rows miss a class.
  const std::set<int> all_classes(y.begin(), y.end());
  std::vector<int> ids;
  for (int f = 0; f < options.folds; ++f) ids.push_back(f);
  for (bool changed = true; changed && ids.size() > 2;) {
    changed = false;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      std::set<int> seen;
      for (std::size_t i = 0; i < y.size(); ++i)
        if (fold[i] == ids[k]) seen.insert(y[i]);
      if (seen.size() == all_classes.size()) continue;
      const int into = ids[k + 1 < ids.size() ? k + 1 : k - 1];
      m.warnings.push_back("stack: fold " + std::to_string(ids[k]) + " lacks " +
                           std::to_string(all_classes.size() - seen.size()) + " class(es); merged into fold " +
                           std::to_string(into));
      for (int& f : fold)
        if (f == ids[k]) f = into;
      ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(k));
      changed = true;
      break;
    }
  }
  m.folds_used = static_cast<int>(ids.size());

  const Vector w = weights.empty() ? Vector::Ones(X.rows()) : Vector(Eigen::Map<const Vector>(weights.data(), X.rows()));
  Matrix oof = Matrix::Zero(X.rows(), static_cast<Eigen::Index>(bases.size()) * num_classes);
  for (int f : ids) {
    std::vector<Eigen::Index> train, held;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? held : train).push_back(static_cast<Eigen::Index>(i));
    const Matrix Xt = select_rows(X, train);
    const Matrix Xh = select_rows(X, held);
    std::vector<int> yt;
    std::vector<double> wt;
    for (auto i : train) {
      yt.push_back(y[static_cast<std::size_t>(i)]);
      wt.push_back(w(i));
    }
    for (std::size_t b = 0; b < bases.size(); ++b) {
      const auto model = bases[b](Xt, yt, num_classes, wt);
      const Matrix P = model->predict_proba(Xh);
      for (std::size_t r = 0; r < held.size(); ++r)
        oof.block(held[r], static_cast<Eigen::Index>(b) * num_classes, 1, num_classes) = P.row(static_cast<Eigen::Index>(r));
    }
  }
  m.meta = fit_logreg(oof, one_hot(y, num_classes), w, options.meta);
  for (const auto& factory : bases) m.bases.push_back(factory(X, y, num_classes, weights));
  return m;
}

}  // namespace embercall::models
