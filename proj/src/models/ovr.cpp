#include "embercall/models/ovr.hpp"

#include <algorithm>
#include <cmath>

namespace embercall::models {

Matrix OvrModel::predict_proba(const Matrix& X) const {
  check_input(X, dim, "ovr");
  Matrix P = Matrix::Zero(X.rows(), num_classes());
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    if (per_class[c]) {
      const Matrix Z = per_class[c]->decision_function(X);
      P.col(col) = ((Z.col(0) - Z.col(1)).array().exp() + 1.0).inverse().matrix();
    } else if (std::find(always_positive.begin(), always_positive.end(), static_cast<int>(c)) != always_positive.end()) {
      P.col(col).setOnes();
    }
  }
  return P;
}

Json OvrModel::describe() const {
  Json fitted = Json::array();
  for (const auto& m : per_class) fitted.push_back(m.has_value());
  return {{"kind", kind()},     {"classes", num_classes()},          {"dim", dim},
          {"l2", l2},           {"fitted", fitted},                   {"always_positive", always_positive},
          {"skipped", skipped}, {"layout", "per fitted class: W[2][dim], b[2]"}};
}

void OvrModel::append_params(std::vector<double>& out) const {
  for (const auto& m : per_class)
    if (m) m->append_params(out);
}

OvrModel OvrModel::restore(const Json& d, std::span<const double>& params) {
  OvrModel m;
  m.dim = d.at("dim").get<int>();
  m.l2 = d.at("l2").get<double>();
  m.always_positive = d.at("always_positive").get<std::vector<int>>();
  m.skipped = d.at("skipped").get<std::vector<int>>();
  const Json binary = {{"classes", 2}, {"dim", m.dim}, {"l2", m.l2}};
  for (const auto& fitted : d.at("fitted")) {
    if (fitted.get<bool>())
      m.per_class.emplace_back(LinearModel::restore(binary, params));
    else
      m.per_class.emplace_back(std::nullopt);
  }
  return m;
}

OvrModel fit_ovr(const Matrix& X, std::span<const std::vector<int>> labels, int num_classes, const LogregOptions& options,
                 std::span<const double> weights) {
  if (X.rows() == 0) throw ValidationError("ovr: no training rows");
  if (labels.size() != static_cast<std::size_t>(X.rows())) throw ValidationError("ovr: X and labels differ in length");
  if (!weights.empty() && weights.size() != labels.size()) throw ValidationError("ovr: weights and labels differ in length");
  const Vector w = weights.empty() ? Vector::Ones(X.rows()) : Vector(Eigen::Map<const Vector>(weights.data(), X.rows()));

  std::vector<std::vector<char>> member(static_cast<std::size_t>(num_classes), std::vector<char>(labels.size(), 0));
  for (std::size_t j = 0; j < labels.size(); ++j)
    for (int c : labels[j]) {
      if (c < 0 || c >= num_classes) throw ValidationError("ovr: label " + std::to_string(c) + " out of range");
      member[static_cast<std::size_t>(c)][j] = 1;
    }

  OvrModel m;
  m.dim = static_cast<int>(X.cols());
  m.l2 = options.l2;
  for (int c = 0; c < num_classes; ++c) {
    const auto& pos = member[static_cast<std::size_t>(c)];
    const auto n_pos = std::count(pos.begin(), pos.end(), 1);
    if (n_pos == 0) {
      m.skipped.push_back(c);
      m.per_class.emplace_back(std::nullopt);
      continue;
    }
    if (n_pos == static_cast<long>(pos.size())) {
      m.always_positive.push_back(c);
      m.per_class.emplace_back(std::nullopt);
      continue;
    }
    Matrix T = Matrix::Zero(X.rows(), 2);
    for (std::size_t j = 0; j < pos.size(); ++j) T(static_cast<Eigen::Index>(j), pos[j] ? 1 : 0) = 1.0;
    m.per_class.emplace_back(fit_logreg(X, T, w, options));
  }
  return m;
}

}  // namespace embercall::models
