#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace autodml {

// Least-squares solve of a symmetric PSD system via eigen-decomposition;
// rank-deficient directions are dropped (pseudo-inverse solution).
inline Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  double rel_cutoff = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double cutoff = rel_cutoff * std::max(vals.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    if (vals[i] > cutoff) inv[i] = 1.0 / vals[i];
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * b;
}

// Symmetric square root of a numerically PSD matrix. Eigenvalues below
// -neg_tol raise; the rest are clamped at zero.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& A, double neg_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  Eigen::VectorXd vals = eig.eigenvalues();
  const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
  Eigen::VectorXd root(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < -neg_tol * scale)
      throw std::invalid_argument("symmetric_sqrt: matrix is not positive semi-definite");
    root[i] = vals[i] > 0 ? std::sqrt(vals[i]) : 0.0;
  }
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace autodml
