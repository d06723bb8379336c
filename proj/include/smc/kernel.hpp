#pragma once

#include <Eigen/Core>
#include <cmath>

namespace smc {

/// Squared-exponential kernel parameters. The length scale enters the
/// exponent linearly, k(x,x') = exp(-|x-x'|^2 / (2 l)); the predictive-mean
/// gradient -(x-u)/l * k(x,u) relies on this convention. Distances are
/// taken in [0,1]-normalized coordinates throughout the GP layer, so l is
/// expressed in normalized units.
struct KernelParams {
  double length_scale = 0.25;
  double jitter = 1e-6;
};

inline double se_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                        const KernelParams& p) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * p.length_scale));
}

/// Gradient of se_kernel in its first argument.
inline Eigen::VectorXd se_kernel_gradient(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u,
                                          const KernelParams& p) {
  return -((x - u) / p.length_scale) * se_kernel(x, u, p);
}

/// Cross kernel matrix, entry (i,j) = k(A.row(i), B.row(j)). No jitter.
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& B,
                                     const KernelParams& p) {
  Eigen::MatrixXd out(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      out(i, j) = std::exp(-(A.row(i) - B.row(j)).squaredNorm() /
                           (2.0 * p.length_scale));
  return out;
}

/// Square kernel matrix of one point set with jitter on the diagonal.
/// Exactly symmetric by construction; positive definite for any inputs
/// (duplicates included) once jitter > 0.
inline Eigen::MatrixXd kernel_matrix_sym(const Eigen::MatrixXd& A,
                                         const KernelParams& p) {
  Eigen::MatrixXd out(A.rows(), A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    out(i, i) = 1.0 + p.jitter;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double k = std::exp(-(A.row(i) - A.row(j)).squaredNorm() /
                                (2.0 * p.length_scale));
      out(i, j) = k;
      out(j, i) = k;
    }
  }
  return out;
}

}  // namespace smc
