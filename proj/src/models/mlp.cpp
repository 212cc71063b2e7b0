#include "embercall/models/mlp.hpp"

#include <cmath>
#include <numeric>

#include "embercall/models/linear.hpp"

namespace embercall::models {

namespace {

Matrix hidden_layer(const MlpModel& m, const Matrix& X) {
  Matrix H = X * m.W1.transpose();
  H.rowwise() += m.b1.transpose();
  return H.cwiseMax(0.0);
}

Matrix output_logits(const MlpModel& m, const Matrix& H) {
  Matrix Z = H * m.W2.transpose();
  Z.rowwise() += m.b2.transpose();
  return Z;
}

}  // namespace

Matrix MlpModel::predict_proba(const Matrix& X) const {
  check_input(X, input_dim(), "mlp");
  return softmax_rows(output_logits(*this, hidden_layer(*this, X)));
}

Json MlpModel::describe() const {
  return {{"kind", kind()},
          {"classes", num_classes()},
          {"dim", input_dim()},
          {"hidden", W1.rows()},
          {"lr", options.lr},
          {"epochs", options.epochs},
          {"batch_size", options.batch_size},
          {"seed", options.seed},
          {"layout", "W1[hidden][dim], b1[hidden], W2[classes][hidden], b2[classes]"}};
}

void MlpModel::append_params(std::vector<double>& out) const {
  out.insert(out.end(), W1.data(), W1.data() + W1.size());
  out.insert(out.end(), b1.data(), b1.data() + b1.size());
  out.insert(out.end(), W2.data(), W2.data() + W2.size());
  out.insert(out.end(), b2.data(), b2.data() + b2.size());
}

MlpModel MlpModel::restore(const Json& d, std::span<const double>& params) {
  const int C = d.at("classes").get<int>();
  const int dim = d.at("dim").get<int>();
  const int h = d.at("hidden").get<int>();
  MlpModel m;
  m.options.hidden = h;
  m.options.lr = d.at("lr").get<double>();
  m.options.epochs = d.at("epochs").get<int>();
  m.options.batch_size = d.at("batch_size").get<int>();
  m.options.seed = d.at("seed").get<std::uint64_t>();
  auto w1 = take(params, static_cast<std::size_t>(h) * static_cast<std::size_t>(dim), "mlp");
  m.W1 = Eigen::Map<const Matrix>(w1.data(), h, dim);
  auto b1 = take(params, static_cast<std::size_t>(h), "mlp");
  m.b1 = Eigen::Map<const Vector>(b1.data(), h);
  auto w2 = take(params, static_cast<std::size_t>(C) * static_cast<std::size_t>(h), "mlp");
  m.W2 = Eigen::Map<const Matrix>(w2.data(), C, h);
  auto b2 = take(params, static_cast<std::size_t>(C), "mlp");
  m.b2 = Eigen::Map<const Vector>(b2.data(), C);
  return m;
}

MlpModel init_mlp(int input_dim, int num_classes, const MlpOptions& options) {
  if (options.hidden < 1) throw ValidationError("mlp: hidden width must be >= 1");
  if (input_dim < 1 || num_classes < 2) throw ValidationError("mlp: need dim >= 1 and at least two classes");
  Rng rng(options.seed);
  MlpModel m;
  m.options = options;
  const double s1 = std::sqrt(2.0 / input_dim);
  const double s2 = std::sqrt(2.0 / options.hidden);
  m.W1.resize(options.hidden, input_dim);
  for (Eigen::Index i = 0; i < m.W1.size(); ++i) m.W1.data()[i] = s1 * rng.normal();
  m.b1 = Vector::Zero(options.hidden);
  m.W2.resize(num_classes, options.hidden);
  for (Eigen::Index i = 0; i < m.W2.size(); ++i) m.W2.data()[i] = s2 * rng.normal();
  m.b2 = Vector::Zero(num_classes);
  return m;
}

double mlp_objective(const MlpModel& m, const Matrix& X, const Matrix& targets, const Vector& weights, MlpGradient* grad) {
  Matrix pre = X * m.W1.transpose();
  pre.rowwise() += m.b1.transpose();
  const Matrix H = pre.cwiseMax(0.0);
  const Matrix Z = output_logits(m, H);
  const double total_weight = weights.sum();
  double loss = 0.0;
  Matrix G(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double mx = Z.row(i).maxCoeff();
    const auto e = (Z.row(i).array() - mx).exp();
    const double s = e.sum();
    const double tsum = targets.row(i).sum();
    loss += weights(i) * ((mx + std::log(s)) * tsum - targets.row(i).dot(Z.row(i)));
    G.row(i) = (weights(i) / total_weight) * ((e / s).matrix() * tsum - targets.row(i));
  }
  loss /= total_weight;
  if (grad) {
    grad->W2 = G.transpose() * H;
    grad->b2 = G.colwise().sum().transpose();
    Matrix GH = G * m.W2;
    GH = GH.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    grad->W1 = GH.transpose() * X;
    grad->b1 = GH.colwise().sum().transpose();
  }
  return loss;
}

MlpModel fit_mlp(const Matrix& X, std::span<const int> y, int num_classes, const MlpOptions& options,
                 std::span<const double> weights) {
  check_labels(X, y, num_classes, weights, "mlp");
  if (options.epochs < 1 || options.batch_size < 1 || !(options.lr > 0.0))
    throw ValidationError("mlp: epochs, batch_size and lr must be positive");
  MlpModel m = init_mlp(static_cast<int>(X.cols()), num_classes, options);
  const Matrix T = one_hot(y, num_classes);
  const Vector w = weights.empty() ? Vector::Ones(X.rows()) : Vector(Eigen::Map<const Vector>(weights.data(), X.rows()));

  Rng rng(derive_seed({"mlp-batches", std::to_string(options.seed)}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(options.batch_size);
  MlpGradient g;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    double epoch_weight = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t end = std::min(order.size(), start + batch);
      const auto n = static_cast<Eigen::Index>(end - start);
      Matrix Xb(n, X.cols()), Tb(n, T.cols());
      Vector wb(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto src = order[start + static_cast<std::size_t>(r)];
        Xb.row(r) = X.row(src);
        Tb.row(r) = T.row(src);
        wb(r) = w(src);
      }
      const double loss = mlp_objective(m, Xb, Tb, wb, &g);
      if (!std::isfinite(loss))
        throw RuntimeError("mlp: non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           " (lr " + format_number(options.lr) + "); try a smaller learning rate");
      epoch_loss += loss * wb.sum();
      epoch_weight += wb.sum();
      m.W1 -= options.lr * g.W1;
      m.b1 -= options.lr * g.b1;
      m.W2 -= options.lr * g.W2;
      m.b2 -= options.lr * g.b2;
    }
    m.loss_curve.push_back(epoch_loss / epoch_weight);
  }
  return m;
}

}  // namespace embercall::models
