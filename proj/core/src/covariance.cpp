#include "foresttrav/covariance.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>

namespace foresttrav {

Mat3 regularize_covariance(const Mat3& cov) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  Vec3 eigenvalues = solver.eigenvalues();
  const double floor =
      std::max(1e-4 * eigenvalues.maxCoeff(), 1e-9);
  for (int i = 0; i < 3; ++i) {
    eigenvalues[i] = std::max(eigenvalues[i], floor);
  }
  return solver.eigenvectors() * eigenvalues.asDiagonal() *
         solver.eigenvectors().transpose();
}

Mat3 cholesky_lower(const Mat3& m) {
  Eigen::LLT<Mat3> llt(m);
  return llt.matrixL();
}

}  // namespace foresttrav
