#include "embercall/models/cnb.hpp"

#include "embercall/models/linear.hpp"

namespace embercall::models {

CnbModel fit_cnb(const Matrix& X, std::span<const int> y, int num_classes, double alpha, std::span<const double> weights) {
  return fit_cnb(X.rowwise(), y, num_classes, alpha, weights);
}

Matrix CnbModel::scores(const Matrix& X) const {
  check_input(X, input_dim(), "cnb");
  if ((X.array() < 0.0).any()) throw ValidationError("complement NB requires nonnegative features");
  return -(X * w.transpose());
}

Matrix CnbModel::predict_proba(const Matrix& X) const { return softmax_rows(scores(X)); }

Json CnbModel::describe() const {
  return {{"kind", kind()}, {"classes", num_classes()}, {"dim", input_dim()}, {"alpha", alpha}, {"layout", "w[classes][dim]"}};
}

void CnbModel::append_params(std::vector<double>& out) const { out.insert(out.end(), w.data(), w.data() + w.size()); }

CnbModel CnbModel::restore(const Json& d, std::span<const double>& params) {
  const int C = d.at("classes").get<int>();
  const int dim = d.at("dim").get<int>();
  CnbModel m;
  m.alpha = d.at("alpha").get<double>();
  auto w = take(params, static_cast<std::size_t>(C) * static_cast<std::size_t>(dim), "cnb");
  m.w = Eigen::Map<const Matrix>(w.data(), C, dim);
  return m;
}

}  // namespace embercall::models
