#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "smc/svgp.hpp"

namespace smc {

namespace detail {

/// Fixed pieces of the streaming objective
///   F = E_qnew[log p(y_new|g)] - KL(qnew(v), p(v))
///       - KL(qnew(u), qold(u)) + KL(qnew(u), p(u)).
/// The last two terms are evaluated jointly as
///   E_{qnew(u)}[log qold(u) - log p(u)],
/// which needs no inverse or log-determinant of the projected covariance
/// S_u = C + P Sigma P^T (S_u can be near-singular when v is close to u).
struct StreamingTerms {
  LikTerms lik;
  Eigen::MatrixXd P;  // m_u x m_v, K_uv Kvv^{-1} R_v (whitened projection)
  Eigen::VectorXd mu_old;
  Eigen::LLT<Eigen::MatrixXd> old_llt;    // of Sigma_old
  Eigen::LLT<Eigen::MatrixXd> prior_llt;  // of K_uu (jittered)
  Eigen::MatrixXd correction_quad;  // P^T (Kuu^{-1} - Sigma_old^{-1}) P
  Eigen::VectorXd correction_lin;   // P^T Sigma_old^{-1} mu_old
  double const_terms = 0;           // trace terms over C and the log-dets
};

inline StreamingTerms build_streaming_terms(const VariationalPosterior& q_new,
                                            const Dataset& data_new,
                                            const VariationalPosterior& q_old) {
  StreamingTerms t;
  t.lik = build_lik_terms(q_new, data_new);

  const Eigen::MatrixXd& u = q_old.inducing_normalized();
  const Eigen::MatrixXd& v = q_new.inducing_normalized();
  const Eigen::Index mu_dim = u.rows();
  const bool same_inducing = (u.rows() == v.rows()) && (u == v);

  const Eigen::MatrixXd kuu = kernel_matrix_sym(u, q_old.kernel());
  Eigen::MatrixXd proj;  // K_uv Kvv^{-1}
  Eigen::MatrixXd C;     // K_uu - proj K_vu (projected prior residual)
  if (same_inducing) {
    proj = Eigen::MatrixXd::Identity(mu_dim, mu_dim);
    C = Eigen::MatrixXd::Zero(mu_dim, mu_dim);
  } else {
    const Eigen::MatrixXd kvu = kernel_matrix(v, u, q_new.kernel());
    proj = q_new.kmm_llt().solve(kvu).transpose();  // m_u x m_v
    C = kuu - proj * kvu;
    C = 0.5 * (C + C.transpose()).eval();
    C.diagonal().array() += q_new.kernel().jitter;
  }
  t.P = proj * Eigen::MatrixXd(q_new.kmm_llt().matrixL());

  t.mu_old = q_old.mu();
  t.old_llt.compute(q_old.sigma());
  if (t.old_llt.info() != Eigen::Success)
    throw RuntimeFailure("streaming: old posterior covariance is not PD");
  t.prior_llt.compute(kuu);
  if (t.prior_llt.info() != Eigen::Success)
    throw RuntimeFailure("streaming: inducing kernel matrix is not PD");

  const Eigen::MatrixXd old_inv_P = t.old_llt.solve(t.P);
  const Eigen::MatrixXd prior_inv_P = t.prior_llt.solve(t.P);
  t.correction_quad = t.P.transpose() * (prior_inv_P - old_inv_P);
  t.correction_quad =
      0.5 * (t.correction_quad + t.correction_quad.transpose()).eval();
  t.correction_lin = old_inv_P.transpose() * t.mu_old;

  const double mu_old_quad = t.mu_old.dot(t.old_llt.solve(t.mu_old));
  t.const_terms = -0.5 * (t.old_llt.solve(C).trace() +
                          logdet_from_llt(t.old_llt) + mu_old_quad) +
                  0.5 * (t.prior_llt.solve(C).trace() +
                         logdet_from_llt(t.prior_llt));
  return t;
}

/// Adds E_{qnew(u)}[log qold(u)] - E_{qnew(u)}[log p(u)] where, in whitened
/// coordinates of q_new, qnew(u) = N(P a, C + P Lw Lw^T P^T).
inline void accumulate_streaming_correction(const StreamingTerms& t,
                                            const Eigen::VectorXd& a,
                                            const Eigen::MatrixXd& Lw,
                                            bool want_grad, Objective& obj) {
  const Eigen::VectorXd au = t.P * a;
  const Eigen::MatrixXd G = t.P * Lw;  // m_u x m_v

  const double cross_old = au.dot(t.old_llt.solve(au)) -
                           2.0 * au.dot(t.old_llt.solve(t.mu_old));
  const double tr_old = t.old_llt.solve(G).cwiseProduct(G).sum();
  const double quad_prior = au.dot(t.prior_llt.solve(au));
  const double tr_prior = t.prior_llt.solve(G).cwiseProduct(G).sum();

  obj.value += t.const_terms - 0.5 * (cross_old + tr_old) +
               0.5 * (quad_prior + tr_prior);
  if (want_grad) {
    obj.grad_mu += t.correction_quad * a + t.correction_lin;
    obj.grad_L += t.correction_quad * Lw;
  }
}

}  // namespace detail

/// Streaming lower bound on log p(y_new | y_old) for a candidate posterior
/// q_new over inducing set v, given the previous posterior q_old over u.
/// With q_old equal to the prior the two correction terms cancel exactly and
/// the bound coincides with elbo(q_new, data_new).
inline double streaming_bound(const VariationalPosterior& q_new,
                              const Dataset& data_new,
                              const VariationalPosterior& q_old,
                              const FitOptions& opts = {}) {
  const auto terms = detail::build_streaming_terms(q_new, data_new, q_old);
  const GaussHermite& gh = gauss_hermite(opts.quad_nodes);
  Eigen::VectorXd a;
  Eigen::MatrixXd Lw;
  detail::whiten(q_new, a, Lw);
  detail::Objective obj = detail::elbo_objective(terms.lik, a, Lw, gh, false);
  if (std::isfinite(obj.value))
    detail::accumulate_streaming_correction(terms, a, Lw, false, obj);
  return obj.value;
}

/// Absorbs a new data batch without revisiting old observations: starts
/// from q_old projected onto the new inducing set v and maximizes the
/// streaming bound with the same optimizer as fit.
inline FitResult update(const VariationalPosterior& q_old,
                        const Dataset& data_new, const Eigen::MatrixXd& v,
                        const FitOptions& opts = {}) {
  VariationalPosterior q_base(v, q_old.space(), q_old.kernel());

  const bool same = (v.rows() == q_old.num_inducing()) &&
                    (q_base.inducing_normalized() == q_old.inducing_normalized());
  if (same) {
    q_base.set_variational(q_old.mu(), q_old.sigma_sqrt());
  } else {
    // Project q_old onto v under the sparse conditional.
    const Eigen::MatrixXd kvu = kernel_matrix(q_base.inducing_normalized(),
                                              q_old.inducing_normalized(),
                                              q_old.kernel());
    const Eigen::MatrixXd p = q_old.kmm_llt().solve(kvu.transpose()).transpose();
    const Eigen::VectorXd mu0 = p * q_old.mu();
    Eigen::MatrixXd s0 = q_base.kmm() - p * kvu.transpose() +
                         p * q_old.sigma() * p.transpose();
    s0 = 0.5 * (s0 + s0.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(s0);
    double bump = q_old.kernel().jitter;
    while (llt.info() != Eigen::Success && bump < 1e-2) {
      s0.diagonal().array() += bump;
      bump *= 10;
      llt.compute(s0);
    }
    if (llt.info() != Eigen::Success)
      throw RuntimeFailure("streaming: projected covariance is not PD");
    q_base.set_variational(mu0, Eigen::MatrixXd(llt.matrixL()));
  }

  const auto terms = detail::build_streaming_terms(q_base, data_new, q_old);
  const GaussHermite& gh = gauss_hermite(opts.quad_nodes);
  Eigen::VectorXd a;
  Eigen::MatrixXd Lw;
  detail::whiten(q_base, a, Lw);
  auto objective = [&](const Eigen::VectorXd& av, const Eigen::MatrixXd& lv,
                       bool grad) {
    detail::Objective obj = detail::elbo_objective(terms.lik, av, lv, gh, grad);
    if (std::isfinite(obj.value))
      detail::accumulate_streaming_correction(terms, av, lv, grad, obj);
    if (grad) obj.grad_L = obj.grad_L.triangularView<Eigen::Lower>();
    return obj;
  };
  auto opt = detail::rprop_maximize(a, Lw, objective, opts);
  const auto R = q_base.kmm_llt().matrixL();
  q_base.set_variational(R * a, R * Lw);
  return {std::move(q_base), std::move(opt.trace), opt.converged};
}

}  // namespace smc
