#include "embercall/projection.hpp"

#include <Eigen/Eigenvalues>

namespace embercall {

Projection pca2(const models::Matrix& X) {
  if (X.rows() < 3) throw ValidationError("projection needs at least 3 rows, got " + std::to_string(X.rows()));
  if (!X.allFinite()) throw ValidationError("projection: non-finite input");
  Projection p;
  p.mean = X.colwise().mean().transpose();
  const models::Matrix centered = X.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(X.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw RuntimeError("projection: eigendecomposition failed");

  const auto& values = solver.eigenvalues();  // ascending
  const auto n = values.size();
  if (n < 2) throw ValidationError("projection: rank < 2 after centering");
  const double top = values(n - 1);
  const double tol = 1e-12 * std::max(1.0, std::abs(top)) * static_cast<double>(n);
  if (!(values(n - 2) > tol)) throw ValidationError("projection: rank < 2 after centering");

  p.axes.resize(X.cols(), 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd axis = solver.eigenvectors().col(n - 1 - k);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    p.axes.col(k) = axis;
    p.variance[k] = values(n - 1 - k);
  }
  p.coords = centered * p.axes;
  return p;
}

}  // namespace embercall
