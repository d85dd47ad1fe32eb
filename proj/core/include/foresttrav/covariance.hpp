#pragma once

#include "foresttrav/types.hpp"

namespace foresttrav {

// Eigenvalue floor keeping per-voxel point covariances invertible: each
// eigenvalue is raised to at least max(1e-4 * lambda_max, 1e-9 m^2). Input
// must be symmetric; output is symmetric positive definite (or 1e-9 * I for a
// zero matrix).
Mat3 regularize_covariance(const Mat3& cov);

// Lower-triangular Cholesky factor S with nonnegative diagonal, S * S^T = m.
// Input must be symmetric positive definite.
Mat3 cholesky_lower(const Mat3& m);

}  // namespace foresttrav
