#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "smc/dataset.hpp"
#include "smc/errors.hpp"
#include "smc/gaussian.hpp"
#include "smc/kernel.hpp"
#include "smc/quadrature.hpp"
#include "smc/space.hpp"

namespace smc {

struct FitOptions {
  int max_iterations = 500;
  double tolerance = 1e-6;  // relative ELBO change counted as converged
  double initial_step = 0.05;
  int quad_nodes = 32;
  int patience = 5;  // consecutive converged steps before stopping
  std::uint64_t seed = 0;
};

struct PredictiveDist {
  double mean = 0;
  double variance = 0;
};

/// Sparse variational posterior for Bernoulli-observed GP classification
/// with a probit link: inducing locations u, q(u) = N(mu, L L^T), and the
/// fixed SE kernel. Prediction at x uses the sparse conditional
///   mean = k(x,u) Kmm^{-1} mu,
///   var  = k(x,x) - k(x,u) Kmm^{-1} (Kmm - Sigma) Kmm^{-1} k(u,x).
/// Immutable from the caller's perspective once fitted; prediction methods
/// are const and safe to call concurrently.
class VariationalPosterior {
 public:
  VariationalPosterior(const Eigen::MatrixXd& inducing,
                       const ParameterSpace& space, const KernelParams& kernel)
      : space_(space), kernel_(kernel) {
    if (inducing.rows() < 1)
      throw ConfigError("need at least one inducing point");
    if (inducing.cols() != space.dim())
      throw ConfigError("inducing point dimension does not match space");
    for (Eigen::Index i = 0; i < inducing.rows(); ++i)
      for (Eigen::Index j = 0; j < i; ++j)
        if (inducing.row(i) == inducing.row(j))
          throw ConfigError("duplicate inducing points");
    z_ = space_.normalize_rows(inducing);
    init_kernel_caches();
    const Eigen::Index m = z_.rows();
    mu_ = Eigen::VectorXd::Zero(m);
    L_ = Eigen::MatrixXd::Identity(m, m);
    alpha_ = Eigen::VectorXd::Zero(m);
  }

  Eigen::Index num_inducing() const { return z_.rows(); }
  int dim() const { return space_.dim(); }
  const Eigen::MatrixXd& inducing_normalized() const { return z_; }
  Eigen::MatrixXd inducing() const { return space_.denormalize_rows(z_); }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& sigma_sqrt() const { return L_; }
  Eigen::MatrixXd sigma() const { return L_ * L_.transpose(); }
  GaussianDist dist() const { return {mu_, sigma()}; }
  const KernelParams& kernel() const { return kernel_; }
  const ParameterSpace& space() const { return space_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::MatrixXd& kmm() const { return kmm_; }
  const Eigen::LLT<Eigen::MatrixXd>& kmm_llt() const { return kmm_llt_; }

  /// Replaces the variational parameters. L is taken as a lower-triangular
  /// square root; its strict upper triangle is ignored.
  void set_variational(const Eigen::VectorXd& mu, const Eigen::MatrixXd& L) {
    const Eigen::Index m = z_.rows();
    if (mu.size() != m || L.rows() != m || L.cols() != m)
      throw ConfigError("variational parameter dimension mismatch");
    mu_ = mu;
    L_ = L.triangularView<Eigen::Lower>();
    alpha_ = kmm_llt_.solve(mu_);
  }

  /// Rebuilds a posterior from serialized parts (normalized inducing
  /// coordinates are stored verbatim so reloading is bit-exact).
  static VariationalPosterior from_parts(const Eigen::MatrixXd& z_normalized,
                                         const ParameterSpace& space,
                                         const KernelParams& kernel,
                                         const Eigen::VectorXd& mu,
                                         const Eigen::MatrixXd& L) {
    VariationalPosterior q(space, kernel, z_normalized);
    q.set_variational(mu, L);
    return q;
  }

  /// Marginal latent Normals at the given points (natural units).
  std::vector<PredictiveDist> latent_marginals(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd Kxu =
        kernel_matrix(space_.normalize_rows(X), z_, kernel_);
    const Eigen::MatrixXd A = kmm_llt_.solve(Kxu.transpose());  // m x N
    const Eigen::VectorXd mean = Kxu * alpha_;
    const Eigen::MatrixXd B = L_.transpose() * A;  // m x N
    std::vector<PredictiveDist> out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double var =
          1.0 - Kxu.row(i).dot(A.col(i)) + B.col(i).squaredNorm();
      out[i] = {mean[i], std::max(var, 0.0)};
    }
    return out;
  }

  /// Joint latent Normal over several points, full covariance. Needed by
  /// the streaming bound when projecting onto old inducing locations.
  GaussianDist joint_marginal(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd Xn = space_.normalize_rows(X);
    const Eigen::MatrixXd Kxu = kernel_matrix(Xn, z_, kernel_);
    const Eigen::MatrixXd A = kmm_llt_.solve(Kxu.transpose());  // m x N
    const Eigen::MatrixXd B = L_.transpose() * A;
    GaussianDist g;
    g.mean = Kxu * alpha_;
    g.cov = kernel_matrix(Xn, Xn, kernel_) - Kxu * A + B.transpose() * B;
    g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
    return g;
  }

  /// E[sigma(g*)] with the probit link has the closed form
  /// Phi(mean / sqrt(1 + var)).
  Eigen::VectorXd predict_probability(const Eigen::MatrixXd& X) const {
    const auto marginals = latent_marginals(X);
    Eigen::VectorXd p(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      p[i] = normal_cdf(marginals[i].mean / std::sqrt(1.0 + marginals[i].variance));
    return p;
  }

  /// Var[sigma(g*)] = E[sigma^2] - E[sigma]^2 by quadrature; always within
  /// [0, 1/4].
  Eigen::VectorXd predictive_variance(const Eigen::MatrixXd& X,
                                      int quad_nodes = 32) const {
    const auto marginals = latent_marginals(X);
    const GaussHermite& gh = gauss_hermite(quad_nodes);
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double s = std::sqrt(2.0 * marginals[i].variance);
      double e1 = 0, e2 = 0;
      for (int k = 0; k < gh.nodes.size(); ++k) {
        const double p = normal_cdf(marginals[i].mean + s * gh.nodes[k]);
        e1 += gh.weights[k] * p;
        e2 += gh.weights[k] * p * p;
      }
      out[i] = std::clamp(e2 - e1 * e1, 0.0, 0.25);
    }
    return out;
  }

  /// Gradient of the latent predictive mean in normalized coordinates:
  /// d/dx k(x,u) alpha = -(1/l) sum_i alpha_i k(x,u_i) (x - u_i).
  Eigen::VectorXd latent_mean_gradient(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd xn = space_.normalize(x);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(xn.size());
    for (Eigen::Index i = 0; i < z_.rows(); ++i) {
      const Eigen::VectorXd diff = xn - z_.row(i).transpose();
      const double k =
          std::exp(-diff.squaredNorm() / (2.0 * kernel_.length_scale));
      grad -= (alpha_[i] * k / kernel_.length_scale) * diff;
    }
    return grad;
  }

 private:
  VariationalPosterior(const ParameterSpace& space, const KernelParams& kernel,
                       const Eigen::MatrixXd& z_normalized)
      : space_(space), kernel_(kernel), z_(z_normalized) {
    init_kernel_caches();
    const Eigen::Index m = z_.rows();
    mu_ = Eigen::VectorXd::Zero(m);
    L_ = Eigen::MatrixXd::Identity(m, m);
    alpha_ = Eigen::VectorXd::Zero(m);
  }

  void init_kernel_caches() {
    kmm_ = kernel_matrix_sym(z_, kernel_);
    kmm_llt_.compute(kmm_);
    if (kmm_llt_.info() != Eigen::Success)
      throw RuntimeFailure("inducing kernel matrix is not positive definite");
  }

  ParameterSpace space_;
  KernelParams kernel_;
  Eigen::MatrixXd z_;  // m x d, normalized coordinates
  Eigen::MatrixXd kmm_;
  Eigen::LLT<Eigen::MatrixXd> kmm_llt_;
  Eigen::VectorXd mu_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
};

namespace detail {

/// Per-unique-location quantities entering the expected log likelihood.
/// Observations are grouped by exact coordinates in lexicographic order, so
/// the accumulation order (and therefore the ELBO bit pattern) does not
/// depend on how the dataset rows were permuted.
///
/// The optimizer works in whitened coordinates: with Kmm = R R^T the
/// variational parameters are (a, Lw) where mu = R a and L = R Lw. Then
/// KL(q || N(0, Kmm)) = (|a|^2 + |Lw|_F^2 - m)/2 - sum log |Lw_ii| and the
/// latent marginal at x_i has mean A_i a and variance c_i + |A_i Lw|^2 with
/// A_i = k(x_i, u) R^{-T}. No Kmm solves remain in the inner loop and the
/// KL geometry is well conditioned regardless of how singular Kmm is.
struct LikTerms {
  Eigen::MatrixXd A;   // U x m, rows k(x_i, u) R^{-T}
  Eigen::VectorXd c;   // U, prior conditional variance at x_i
  Eigen::VectorXd n1;  // positive-label counts
  Eigen::VectorXd n0;  // negative-label counts
};

inline LikTerms build_lik_terms(const VariationalPosterior& q,
                                const Dataset& data) {
  LikTerms t;
  const Eigen::Index n = data.size();
  const Eigen::Index m = q.num_inducing();
  if (n == 0) {
    t.A.resize(0, m);
    t.c.resize(0);
    t.n1.resize(0);
    t.n0.resize(0);
    return t;
  }
  if (data.points.cols() != q.dim())
    throw ConfigError("dataset dimension does not match posterior");

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& P = data.points;
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index d = 0; d < P.cols(); ++d) {
      if (P(a, d) < P(b, d)) return true;
      if (P(a, d) > P(b, d)) return false;
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);

  std::vector<Eigen::Index> reps;
  std::vector<double> n1, n0;
  for (Eigen::Index idx : order) {
    if (reps.empty() || P.row(idx) != P.row(reps.back())) {
      reps.push_back(idx);
      n1.push_back(0);
      n0.push_back(0);
    }
    (data.labels[idx] ? n1.back() : n0.back()) += 1.0;
  }
  const Eigen::Index U = static_cast<Eigen::Index>(reps.size());
  Eigen::MatrixXd Xn(U, P.cols());
  for (Eigen::Index u = 0; u < U; ++u)
    Xn.row(u) = q.space().normalize(P.row(reps[u]).transpose()).transpose();

  const Eigen::MatrixXd Kxu = kernel_matrix(Xn, q.inducing_normalized(), q.kernel());
  t.A = q.kmm_llt().matrixL().solve(Kxu.transpose()).transpose();
  t.c = (1.0 - t.A.rowwise().squaredNorm().array()).max(0.0).matrix();
  t.n1 = Eigen::Map<Eigen::VectorXd>(n1.data(), U);
  t.n0 = Eigen::Map<Eigen::VectorXd>(n0.data(), U);
  return t;
}

struct Objective {
  double value = 0;
  Eigen::VectorXd grad_mu;
  Eigen::MatrixXd grad_L;
};

/// Sum over observations of E_{q(g_i)}[log p(y_i | g_i)], with the
/// expectation and its (mean, variance) derivatives taken through the
/// Gauss-Hermite sum.
inline void accumulate_likelihood(const LikTerms& t, const Eigen::VectorXd& mu,
                                  const Eigen::MatrixXd& L,
                                  const GaussHermite& gh, bool want_grad,
                                  Objective& obj) {
  const Eigen::Index U = t.A.rows();
  if (U == 0) return;
  const Eigen::VectorXd mean = t.A * mu;
  const Eigen::MatrixXd B = t.A * L;  // U x m
  Eigen::VectorXd w1(U), w2(U);
  double value = 0;
  for (Eigen::Index i = 0; i < U; ++i) {
    const double v = std::max(t.c[i] + B.row(i).squaredNorm(), 1e-12);
    const double s = std::sqrt(2.0 * v);
    double l1 = 0, d1 = 0, e1 = 0, l0 = 0, d0 = 0, e0 = 0;
    for (int k = 0; k < gh.nodes.size(); ++k) {
      const double g = mean[i] + s * gh.nodes[k];
      const double w = gh.weights[k];
      if (t.n1[i] > 0) {
        l1 += w * log_normal_cdf(g);
        if (want_grad) {
          const double im = inv_mills(g);
          d1 += w * im;
          e1 += w * im * gh.nodes[k];
        }
      }
      if (t.n0[i] > 0) {
        l0 += w * log_normal_cdf(-g);
        if (want_grad) {
          const double im = inv_mills(-g);
          d0 -= w * im;
          e0 -= w * im * gh.nodes[k];
        }
      }
    }
    value += t.n1[i] * l1 + t.n0[i] * l0;
    if (want_grad) {
      w1[i] = t.n1[i] * d1 + t.n0[i] * d0;
      w2[i] = (t.n1[i] * e1 + t.n0[i] * e0) / s;
    }
  }
  obj.value += value;
  if (want_grad) {
    obj.grad_mu += t.A.transpose() * w1;
    obj.grad_L += 2.0 * (t.A.transpose() * (w2.asDiagonal() * B));
  }
}

/// Subtracts KL(q(u) || p(u)) in whitened coordinates. A vanishing diagonal
/// entry of Lw makes the value -inf, which the optimizer rejects.
inline void accumulate_prior_kl(const Eigen::VectorXd& a,
                                const Eigen::MatrixXd& Lw, bool want_grad,
                                Objective& obj) {
  const Eigen::Index m = a.size();
  double logdet_half = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = std::abs(Lw(i, i));
    if (d < 1e-150) {
      obj.value = -std::numeric_limits<double>::infinity();
      return;
    }
    logdet_half += std::log(d);
  }
  const double kl =
      0.5 * (a.squaredNorm() + Lw.squaredNorm() - static_cast<double>(m)) -
      logdet_half;
  obj.value -= kl;
  if (want_grad) {
    obj.grad_mu -= a;
    obj.grad_L -= Lw;
    for (Eigen::Index i = 0; i < m; ++i) obj.grad_L(i, i) += 1.0 / Lw(i, i);
  }
}

/// ELBO and gradients as a function of the whitened parameters (a, Lw).
inline Objective elbo_objective(const LikTerms& terms, const Eigen::VectorXd& a,
                                const Eigen::MatrixXd& Lw,
                                const GaussHermite& gh, bool want_grad) {
  Objective obj;
  const Eigen::Index m = a.size();
  if (want_grad) {
    obj.grad_mu = Eigen::VectorXd::Zero(m);
    obj.grad_L = Eigen::MatrixXd::Zero(m, m);
  }
  accumulate_prior_kl(a, Lw, want_grad, obj);
  if (std::isfinite(obj.value))
    accumulate_likelihood(terms, a, Lw, gh, want_grad, obj);
  if (want_grad)
    obj.grad_L = obj.grad_L.triangularView<Eigen::Lower>();
  return obj;
}

/// Whitened coordinates of a posterior's variational parameters.
inline void whiten(const VariationalPosterior& q, Eigen::VectorXd& a,
                   Eigen::MatrixXd& Lw) {
  const auto R = q.kmm_llt().matrixL();
  a = R.solve(q.mu());
  Lw = R.solve(q.sigma_sqrt());
  Lw = Lw.triangularView<Eigen::Lower>();
}

struct OptimizeResult {
  std::vector<double> trace;  // accepted objective values, starting value first
  bool converged = false;
};

/// Sign-based ascent with per-parameter step sizes (Rprop-style) plus
/// global backtracking: a step is accepted only if the objective does not
/// decrease, so the recorded trace is monotone by construction and the
/// whole optimization is deterministic.
template <typename ObjFn>
OptimizeResult rprop_maximize(Eigen::VectorXd& mu, Eigen::MatrixXd& L,
                              const ObjFn& objective, const FitOptions& opts) {
  constexpr double kGrow = 1.2, kShrink = 0.5, kStepMax = 1e4, kStepMin = 1e-14;
  const Eigen::Index m = mu.size();

  Objective cur = objective(mu, L, true);
  if (!std::isfinite(cur.value))
    throw RuntimeFailure("non-finite ELBO at iteration 0");
  OptimizeResult res;
  res.trace.push_back(cur.value);

  // Parameters far from the origin (e.g. the whitened N(0, I) start when
  // Kmm is nearly singular) get steps proportional to their magnitude so
  // the initial travel takes O(log) iterations.
  Eigen::VectorXd step_mu =
      (0.25 * mu.array().abs()).max(opts.initial_step).matrix();
  Eigen::MatrixXd step_L =
      (0.25 * L.array().abs()).max(opts.initial_step).matrix();
  int calm = 0;

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    Eigen::VectorXd mu_c =
        mu + step_mu.cwiseProduct(cur.grad_mu.cwiseSign());
    Eigen::MatrixXd L_c = L + step_L.cwiseProduct(cur.grad_L.cwiseSign());
    Objective cand = objective(mu_c, L_c, true);

    if (std::isfinite(cand.value) && cand.value >= cur.value) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const double agree = cur.grad_mu[i] * cand.grad_mu[i];
        if (agree > 0)
          step_mu[i] = std::min(step_mu[i] * kGrow, kStepMax);
        else if (agree < 0)
          step_mu[i] = std::max(step_mu[i] * kShrink, kStepMin);
      }
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double agree = cur.grad_L(i, j) * cand.grad_L(i, j);
          if (agree > 0)
            step_L(i, j) = std::min(step_L(i, j) * kGrow, kStepMax);
          else if (agree < 0)
            step_L(i, j) = std::max(step_L(i, j) * kShrink, kStepMin);
        }
      const double rel =
          (cand.value - cur.value) / (1.0 + std::abs(cand.value));
      calm = rel < opts.tolerance ? calm + 1 : 0;
      mu.swap(mu_c);
      L.swap(L_c);
      cur = std::move(cand);
      res.trace.push_back(cur.value);
      if (calm >= opts.patience) {
        res.converged = true;
        break;
      }
    } else {
      step_mu *= kShrink;
      step_L *= kShrink;
      if (step_mu.maxCoeff() < kStepMin && step_L.maxCoeff() < kStepMin) {
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

}  // namespace detail

struct FitResult {
  VariationalPosterior posterior;
  std::vector<double> trace;
  bool converged = false;
};

/// Fresh posterior with q(u) = N(0, I) over the given inducing points
/// (natural units; must be pairwise distinct).
inline VariationalPosterior init_posterior(const Eigen::MatrixXd& inducing,
                                           const ParameterSpace& space,
                                           const KernelParams& kernel) {
  return VariationalPosterior(inducing, space, kernel);
}

/// Evidence lower bound of q on the dataset:
/// sum_i E_{q(g_i)}[log p(y_i|g_i)] - KL(q(u) || p(u)).
inline double elbo(const VariationalPosterior& q, const Dataset& data,
                   const FitOptions& opts = {}) {
  const auto terms = detail::build_lik_terms(q, data);
  Eigen::VectorXd a;
  Eigen::MatrixXd Lw;
  detail::whiten(q, a, Lw);
  return detail::elbo_objective(terms, a, Lw, gauss_hermite(opts.quad_nodes),
                                false)
      .value;
}

/// Maximizes the ELBO over the variational parameters starting from q0.
/// Deterministic; the returned trace is the sequence of accepted ELBO
/// values.
inline FitResult fit(const VariationalPosterior& q0, const Dataset& data,
                     const FitOptions& opts = {}) {
  const auto terms = detail::build_lik_terms(q0, data);
  const GaussHermite& gh = gauss_hermite(opts.quad_nodes);
  Eigen::VectorXd a;
  Eigen::MatrixXd Lw;
  detail::whiten(q0, a, Lw);
  auto objective = [&](const Eigen::VectorXd& av, const Eigen::MatrixXd& lv,
                       bool grad) {
    return detail::elbo_objective(terms, av, lv, gh, grad);
  };
  auto opt = detail::rprop_maximize(a, Lw, objective, opts);
  VariationalPosterior q = q0;
  const auto R = q0.kmm_llt().matrixL();
  q.set_variational(R * a, R * Lw);
  return {std::move(q), std::move(opt.trace), opt.converged};
}

inline std::vector<PredictiveDist> latent_marginals(
    const VariationalPosterior& q, const Eigen::MatrixXd& X) {
  return q.latent_marginals(X);
}

inline Eigen::VectorXd predict_probability(const VariationalPosterior& q,
                                           const Eigen::MatrixXd& X) {
  return q.predict_probability(X);
}

inline Eigen::VectorXd predictive_variance(const VariationalPosterior& q,
                                           const Eigen::MatrixXd& X,
                                           int quad_nodes = 32) {
  return q.predictive_variance(X, quad_nodes);
}

}  // namespace smc
