#include <catch_amalgamated.hpp>

#include "embercall/projection.hpp"
#include "support.hpp"

using namespace embercall;
using models::Matrix;
using models::Vector;

namespace {

/// Rows on a random plane through `offset` in R^dim with distinct spreads.
Matrix plane_rows(int n, int dim, std::uint64_t seed, Vector* offset_out = nullptr) {
  Rng rng(seed);
  Matrix basis(dim, 2);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = rng.normal();
  Vector offset(dim);
  for (auto& v : offset) v = rng.normal();
  Matrix X(n, dim);
  for (int r = 0; r < n; ++r) {
    const double a = 5.0 * rng.normal(), b = rng.normal();
    X.row(r) = (offset + a * basis.col(0) + b * basis.col(1)).transpose();
  }
  if (offset_out) *offset_out = offset;
  return X;
}

}  // namespace

TEST_CASE("rank-two data is reconstructed exactly", "[projection]") {
  const Matrix X = plane_rows(60, 320, 3);
  const auto p = pca2(X);
  REQUIRE(p.axes.rows() == 320);
  REQUIRE(p.axes.cols() == 2);
  REQUIRE(p.coords.rows() == 60);
  CHECK((p.axes.transpose() * p.axes - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  const Matrix rebuilt = (p.coords * p.axes.transpose()).rowwise() + p.mean.transpose();
  CHECK((rebuilt - X).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(p.variance[0] >= p.variance[1]);
  CHECK(p.variance[1] > 0.0);
  CHECK(p.coords.col(0).mean() == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("projection conventions", "[projection]") {
  const Matrix X = plane_rows(40, 12, 8);
  const auto p = pca2(X);
  for (int k = 0; k < 2; ++k) {
    Eigen::Index at = 0;
    p.axes.col(k).cwiseAbs().maxCoeff(&at);
    CHECK(p.axes(at, k) > 0.0);
  }
  SECTION("negating the data keeps the axes") {
    const auto q = pca2(-X);
    CHECK((q.axes - p.axes).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((q.coords + p.coords).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("duplicating every row changes nothing but the row count") {
    Matrix twice(80, 12);
    twice << X, X;
    const auto q = pca2(twice);
    CHECK((q.axes - p.axes).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((q.coords.topRows(40) - p.coords).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("row order does not matter") {
    const Matrix reversed = X.colwise().reverse();
    const auto q = pca2(reversed);
    CHECK((q.axes - p.axes).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("two clusters separate along the first axis", "[projection]") {
  Rng rng(4);
  Matrix X(400, 320);
  Vector direction(320);
  for (auto& v : direction) v = rng.normal();
  direction.normalize();
  for (int r = 0; r < 400; ++r) {
    for (int j = 0; j < 320; ++j) X(r, j) = 0.1 * rng.normal();
    X.row(r) += (r < 200 ? 3.0 : -3.0) * direction.transpose();
  }
  const auto p = pca2(X);
  int separated = 0;
  for (int r = 0; r < 400; ++r) separated += (p.coords(r, 0) > 0) == (p.coords(0, 0) > 0) ? r < 200 : r >= 200;
  CHECK(separated >= 396);
}

TEST_CASE("degenerate inputs are rejected", "[projection]") {
  CHECK_THROWS_AS(pca2(Matrix::Ones(2, 5)), ValidationError);
  CHECK_THROWS_AS(pca2(Matrix::Ones(10, 5)), ValidationError);
  Matrix line(10, 3);
  for (int r = 0; r < 10; ++r) line.row(r) << r, 2.0 * r, -r;
  CHECK_THROWS_AS(pca2(line), ValidationError);
}
