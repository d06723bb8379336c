#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>

#include "smc/errors.hpp"

namespace smc {

/// Gauss-Hermite rule in physicists' convention, with weights rescaled to
/// sum to one: E[f(g)] for g ~ N(mean, var) is
///   sum_k weights[k] * f(mean + sqrt(2 var) * nodes[k]).
struct GaussHermite {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Nodes/weights via Golub-Welsch on the Jacobi matrix. Tables are computed
/// once per node count and shared read-only.
inline const GaussHermite& gauss_hermite(int n) {
  if (n < 1) throw ConfigError("quadrature node count must be >= 1");
  static std::mutex mutex;
  static std::map<int, GaussHermite> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    GaussHermite gh;
    if (n == 1) {
      gh.nodes = Eigen::VectorXd::Zero(1);
      gh.weights = Eigen::VectorXd::Ones(1);
    } else {
      Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd sub(n - 1);
      for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(k / 2.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
      solver.computeFromTridiagonal(diag, sub,
                                    Eigen::ComputeEigenvectors);
      gh.nodes = solver.eigenvalues();
      gh.weights = solver.eigenvectors().row(0).transpose().array().square();
      gh.weights /= gh.weights.sum();
    }
    it = cache.emplace(n, std::move(gh)).first;
  }
  return it->second;
}

/// E[f(g)] for g ~ N(mean, var) by change-of-variables Gauss-Hermite.
template <typename Fn>
double gauss_hermite_expect(Fn&& f, double mean, double var, int n) {
  if (var < 0) throw ConfigError("variance must be non-negative");
  const GaussHermite& gh = gauss_hermite(n);
  const double s = std::sqrt(2.0 * var);
  double acc = 0;
  for (int k = 0; k < gh.nodes.size(); ++k)
    acc += gh.weights[k] * f(mean + s * gh.nodes[k]);
  return acc;
}

}  // namespace smc
