#pragma once

#include "embercall/models/classifier.hpp"

namespace embercall {

struct Projection {
  models::Vector mean;
  models::Matrix axes;    // dim x 2, orthonormal columns
  models::Matrix coords;  // rows x 2
  double variance[2] = {0.0, 0.0};
};

/// Top two principal components of the mean-centered rows. Each axis is signed
/// so its largest-magnitude loading is positive. Fewer than 3 rows, or rank < 2
/// after centering, throws ValidationError.
Projection pca2(const models::Matrix& X);

}  // namespace embercall
