#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "smc/errors.hpp"

namespace smc {

struct GaussianDist {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * 0.3989422804014326779;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

/// log Phi(z), stable over the whole real line.
inline double log_normal_cdf(double z) {
  if (z > -1.0) return std::log1p(-0.5 * std::erfc(z * M_SQRT1_2));
  if (z > -30.0) return std::log(0.5 * std::erfc(-z * M_SQRT1_2));
  // Asymptotic Mills expansion for the deep lower tail.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.91893853320467274178 +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

/// phi(z) / Phi(z), the inverse Mills ratio.
inline double inv_mills(double z) {
  if (z > -1.0) return normal_pdf(z) / normal_cdf(z);
  return std::exp(-0.5 * z * z - 0.91893853320467274178 - log_normal_cdf(z));
}

namespace detail {

inline double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// KL(q || p) for multivariate Gaussians in closed form. Requires a
/// positive-definite p covariance.
inline double kl_gaussians(const GaussianDist& q, const GaussianDist& p) {
  const Eigen::Index m = q.mean.size();
  if (p.mean.size() != m || q.cov.rows() != m || p.cov.rows() != m)
    throw ConfigError("kl_gaussians: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> lltp(p.cov);
  if (lltp.info() != Eigen::Success)
    throw RuntimeFailure("kl_gaussians: p covariance is not positive definite");
  Eigen::LLT<Eigen::MatrixXd> lltq(q.cov);
  if (lltq.info() != Eigen::Success)
    throw RuntimeFailure("kl_gaussians: q covariance is not positive definite");
  const Eigen::VectorXd d = q.mean - p.mean;
  const double trace = lltp.solve(q.cov).trace();
  const double quad = d.dot(lltp.solve(d));
  const double logdets = detail::logdet_from_llt(lltp) - detail::logdet_from_llt(lltq);
  return 0.5 * (trace + quad - static_cast<double>(m) + logdets);
}

/// E_{u ~ N(mean, cov)}[ log N(u; under.mean, under.cov) ]. Used by the
/// streaming bound, where differences of these terms replace explicit KLs
/// so the possibly singular projected covariance is never inverted.
inline double expected_log_density(const Eigen::VectorXd& mean,
                                   const Eigen::MatrixXd& cov,
                                   const GaussianDist& under) {
  const Eigen::Index m = mean.size();
  Eigen::LLT<Eigen::MatrixXd> llt(under.cov);
  if (llt.info() != Eigen::Success)
    throw RuntimeFailure("expected_log_density: covariance is not positive definite");
  const Eigen::VectorXd d = mean - under.mean;
  const double quad = d.dot(llt.solve(d));
  const double trace = llt.solve(cov).trace();
  return -0.5 * (static_cast<double>(m) * 1.8378770664093454836 +
                 detail::logdet_from_llt(llt) + quad + trace);
}

}  // namespace smc
