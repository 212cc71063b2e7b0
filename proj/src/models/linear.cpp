#include "embercall/models/linear.hpp"

#include <cmath>

namespace embercall::models {

Matrix softmax_rows(const Matrix& Z) {
  Matrix P(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double mx = Z.row(i).maxCoeff();
    P.row(i) = (Z.row(i).array() - mx).exp().matrix();
    P.row(i) /= P.row(i).sum();
  }
  return P;
}

Matrix one_hot(std::span<const int> y, int num_classes) {
  Matrix T = Matrix::Zero(static_cast<Eigen::Index>(y.size()), num_classes);
  for (std::size_t i = 0; i < y.size(); ++i) T(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  return T;
}

Matrix LinearModel::decision_function(const Matrix& X) const {
  check_input(X, input_dim(), "logreg");
  Matrix Z = X * W.transpose();
  Z.rowwise() += b.transpose();
  return Z;
}

Matrix LinearModel::predict_proba(const Matrix& X) const { return softmax_rows(decision_function(X)); }

Json LinearModel::describe() const {
  return {{"kind", kind()}, {"classes", num_classes()}, {"dim", input_dim()}, {"l2", l2}, {"layout", "W[classes][dim], b[classes]"}};
}

void LinearModel::append_params(std::vector<double>& out) const {
  out.insert(out.end(), W.data(), W.data() + W.size());
  out.insert(out.end(), b.data(), b.data() + b.size());
}

LinearModel LinearModel::restore(const Json& d, std::span<const double>& params) {
  const int C = d.at("classes").get<int>();
  const int dim = d.at("dim").get<int>();
  LinearModel m;
  m.l2 = d.at("l2").get<double>();
  auto w = take(params, static_cast<std::size_t>(C) * static_cast<std::size_t>(dim), "logreg");
  m.W = Eigen::Map<const Matrix>(w.data(), C, dim);
  auto bias = take(params, static_cast<std::size_t>(C), "logreg");
  m.b = Eigen::Map<const Vector>(bias.data(), C);
  return m;
}

double logreg_objective(const Matrix& X, const Matrix& targets, const Vector& weights, double l2, const Matrix& W,
                        const Vector& b, Matrix* grad_W, Vector* grad_b) {
  Matrix Z = X * W.transpose();
  Z.rowwise() += b.transpose();
  const double total_weight = weights.sum();
  double loss = 0.0;
  Matrix G(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double mx = Z.row(i).maxCoeff();
    const auto e = (Z.row(i).array() - mx).exp();
    const double s = e.sum();
    const double lse = mx + std::log(s);
    // Targets may be soft; cross-entropy is lse * sum(t) - t . z.
    loss += weights(i) * (lse * targets.row(i).sum() - targets.row(i).dot(Z.row(i)));
    G.row(i) = (weights(i) / total_weight) * ((e / s).matrix() * targets.row(i).sum() - targets.row(i));
  }
  loss = loss / total_weight + 0.5 * l2 * W.squaredNorm();
  if (grad_W) *grad_W = G.transpose() * X + l2 * W;
  if (grad_b) *grad_b = G.colwise().sum().transpose();
  return loss;
}

LinearModel fit_logreg(const Matrix& X, const Matrix& targets, const Vector& weights, const LogregOptions& options) {
  if (X.rows() == 0) throw ValidationError("logreg: no training rows");
  if (targets.rows() != X.rows() || weights.size() != X.rows())
    throw ValidationError("logreg: X, targets and weights differ in length");
  if (!X.allFinite() || !targets.allFinite()) throw ValidationError("logreg: non-finite input");
  if ((weights.array() <= 0.0).any() || !weights.allFinite())
    throw ValidationError("logreg: sample weights must be positive and finite");
  if (!(options.l2 >= 0.0)) throw ValidationError("logreg: l2 must be >= 0");
  const Vector mass = targets.transpose() * weights;
  if ((mass.array() > 0.0).count() < 2) throw ValidationError("logreg: training data has a single class");

  const auto C = targets.cols();
  const auto d = X.cols();
  LinearModel m(Matrix::Zero(C, d), Vector::Zero(C), options.l2);
  Matrix gW;
  Vector gb;
  double f = logreg_objective(X, targets, weights, options.l2, m.W, m.b, &gW, &gb);
  m.loss_trace.push_back(f);
  const double w_scale = 1.0 / (1.0 + options.l2);
  double step = 1.0;
  for (m.iterations = 0; m.iterations < options.max_iter; ++m.iterations) {
    const double gnorm_inf = std::max(gW.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff());
    if (gnorm_inf < options.tol) {
      m.converged = true;
      break;
    }
    const double slope = w_scale * gW.squaredNorm() + gb.squaredNorm();
    bool accepted = false;
    while (step > 1e-20) {
      Matrix W_new = m.W - (step * w_scale) * gW;
      Vector b_new = m.b - step * gb;
      const double f_new = logreg_objective(X, targets, weights, options.l2, W_new, b_new);
      if (std::isfinite(f_new) && f_new <= f - 1e-4 * step * slope) {
        m.W = std::move(W_new);
        m.b = std::move(b_new);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    f = logreg_objective(X, targets, weights, options.l2, m.W, m.b, &gW, &gb);
    m.loss_trace.push_back(f);
    step = std::min(step * 2.0, 1e6);
  }
  if (!m.W.allFinite() || !m.b.allFinite()) throw RuntimeError("logreg: parameters diverged");
  return m;
}

LinearModel fit_logreg(const Matrix& X, std::span<const int> y, int num_classes, std::span<const double> weights,
                       const LogregOptions& options) {
  check_labels(X, y, num_classes, weights, "logreg");
  Vector w = weights.empty() ? Vector::Ones(X.rows()) : Vector(Eigen::Map<const Vector>(weights.data(), X.rows()));
  return fit_logreg(X, one_hot(y, num_classes), w, options);
}

}  // namespace embercall::models
