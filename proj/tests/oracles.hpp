#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "embercall/models/linear.hpp"
#include "embercall/models/mlp.hpp"
#include "embercall/util.hpp"

/// Reference data sets and straight-from-the-formula implementations that
/// the model tests compare against.
namespace embercall::oracle {

using models::Classifier;
using models::Matrix;
using models::Vector;

struct Data {
  Matrix X;
  std::vector<int> y;
};

/// Gaussian blobs (sigma 1) around class centers `spread` apart on a circle.
inline Data blobs(int per_class, int classes, int dim, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Data d;
  d.X.resize(per_class * classes, dim);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      for (int j = 0; j < dim; ++j) d.X(r, j) = rng.normal();
      d.X(r, 0) += spread * std::cos(2 * M_PI * c / classes);
      d.X(r, 1 % dim) += spread * std::sin(2 * M_PI * c / classes);
      d.y.push_back(c);
    }
  }
  return d;
}

/// Two classes split by the hyperplane x0 = 0 with a 2-sigma gap.
inline Data separable(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Data d;
  d.X.resize(n, dim);
  for (int r = 0; r < n;) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (auto& v : x) v = rng.normal();
    const int c = r % 2;
    x[0] += c == 0 ? -3.0 : 3.0;
    if (std::fabs(x[0]) < 1.0 || (x[0] > 0) != (c == 1)) continue;
    for (int j = 0; j < dim; ++j) d.X(r, j) = x[static_cast<std::size_t>(j)];
    d.y.push_back(c);
    ++r;
  }
  return d;
}

inline double accuracy(const Classifier& m, const Data& d) {
  const auto pred = models::argmax_rows(m.predict_proba(d.X));
  int ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == d.y[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1e-12, a.norm() + b.norm());
}

inline Vector flatten(const Matrix& W, const Vector& b) {
  Vector v(W.size() + b.size());
  v << Eigen::Map<const Vector>(W.data(), W.size()), b;
  return v;
}


/// Rows adapter that counts how many times iteration starts.
struct CountingRows {
  const std::vector<std::vector<double>>* rows;
  int* passes;
  auto begin() const {
    ++*passes;
    return rows->begin();
  }
  auto end() const { return rows->end(); }
};

/// Complement NB straight from the formula, one class at a time.
inline Matrix brute_force_cnb(const std::vector<std::vector<double>>& X, const std::vector<int>& y, int C, double alpha) {
  const std::size_t dim = X.front().size();
  Matrix w(C, static_cast<Eigen::Index>(dim));
  for (int c = 0; c < C; ++c) {
    std::vector<double> theta(dim);
    double denom = alpha * static_cast<double>(dim);
    for (std::size_t j = 0; j < X.size(); ++j)
      if (y[j] != c)
        for (std::size_t i = 0; i < dim; ++i) denom += X[j][i];
    for (std::size_t i = 0; i < dim; ++i) {
      double num = alpha;
      for (std::size_t j = 0; j < X.size(); ++j)
        if (y[j] != c) num += X[j][i];
      theta[i] = num / denom;
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) norm2 += std::log(theta[i]) * std::log(theta[i]);
    const double norm = norm2 > 0.0 ? std::sqrt(norm2) : 1.0;
    for (std::size_t i = 0; i < dim; ++i) w(c, static_cast<Eigen::Index>(i)) = std::log(theta[i]) / norm;
  }
  return w;
}

/// Four noisy clusters at (+-1, +-1) labeled by the sign product.
inline Data xor_data(int n, std::uint64_t seed) {
  Rng rng(seed);
  Data d;
  d.X.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const int a = i % 2, b = (i / 2) % 2;
    d.X(i, 0) = (a ? 1.0 : -1.0) + 0.1 * rng.normal();
    d.X(i, 1) = (b ? 1.0 : -1.0) + 0.1 * rng.normal();
    d.y.push_back(a ^ b);
  }
  return d;
}

/// Central differences of f over every pointed-to parameter.
template <class F>
Vector central_differences(const std::vector<double*>& params, F f, double h) {
  Vector g(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = *params[i];
    *params[i] = keep + h;
    const double up = f();
    *params[i] = keep - h;
    const double down = f();
    *params[i] = keep;
    g(static_cast<Eigen::Index>(i)) = (up - down) / (2 * h);
  }
  return g;
}

template <class M>
void collect(M& m, std::vector<double*>& out) {
  for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
}

/// Relative error of the analytic logreg gradient at a random point, with
/// random positive sample weights.
inline double logreg_gradient_error(const Data& d, int classes, double l2, Rng& rng) {
  Vector weights(d.X.rows());
  for (auto& v : weights) v = 0.5 + rng.uniform();
  const Matrix targets = models::one_hot(d.y, classes);
  Matrix W(classes, d.X.cols());
  Vector b(classes);
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.normal();
  for (auto& v : b) v = rng.normal();
  Matrix gW;
  Vector gb;
  models::logreg_objective(d.X, targets, weights, l2, W, b, &gW, &gb);
  std::vector<double*> params;
  collect(W, params);
  collect(b, params);
  const Vector numeric = central_differences(
      params, [&] { return models::logreg_objective(d.X, targets, weights, l2, W, b); }, 1e-5);
  return relative_error(flatten(gW, gb), numeric);
}

/// Relative error of the analytic MLP gradient over all four parameter blocks.
inline double mlp_gradient_error(models::MlpModel m, const Data& d) {
  const Matrix targets = models::one_hot(d.y, m.num_classes());
  const Vector w = Vector::Ones(d.X.rows());
  models::MlpGradient g;
  models::mlp_objective(m, d.X, targets, w, &g);
  std::vector<double*> params;
  collect(m.W1, params);
  collect(m.b1, params);
  collect(m.W2, params);
  collect(m.b2, params);
  Vector analytic(static_cast<Eigen::Index>(params.size()));
  analytic << Eigen::Map<const Vector>(g.W1.data(), g.W1.size()), g.b1, Eigen::Map<const Vector>(g.W2.data(), g.W2.size()),
      g.b2;
  const Vector numeric = central_differences(params, [&] { return models::mlp_objective(m, d.X, targets, w); }, 1e-6);
  return relative_error(analytic, numeric);
}

}  // namespace embercall::oracle
