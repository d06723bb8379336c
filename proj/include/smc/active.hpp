#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "smc/dataset.hpp"
#include "smc/property.hpp"
#include "smc/rng.hpp"
#include "smc/space.hpp"
#include "smc/ssa.hpp"
#include "smc/svgp.hpp"

namespace smc {

enum class QueryStrategy { Variance, Gradient, Random };

inline QueryStrategy parse_strategy(const std::string& name) {
  if (name == "variance") return QueryStrategy::Variance;
  if (name == "gradient") return QueryStrategy::Gradient;
  if (name == "random") return QueryStrategy::Random;
  throw ConfigError("unknown query strategy '" + name + "'");
}

inline std::string to_string(QueryStrategy s) {
  switch (s) {
    case QueryStrategy::Variance: return "variance";
    case QueryStrategy::Gradient: return "gradient";
    case QueryStrategy::Random: return "random";
  }
  return "?";
}

struct QueryConfig {
  int pool_size = 1000;
  int n_clusters = 300;
  int batch_size = 100;
  QueryStrategy strategy = QueryStrategy::Variance;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 0 || n_clusters < 0 || pool_size < 1)
      throw ConfigError("query sizes must be positive");
    if (!(batch_size <= n_clusters && n_clusters <= pool_size))
      throw ConfigError("need batch_size <= n_clusters <= pool_size");
  }
};

/// Candidate pool: n points uniform over the box.
inline Eigen::MatrixXd sample_pool(const ParameterSpace& space, int n,
                                   RngStream& rng) {
  return uniform_design(space, n, rng);
}

/// Lloyd iterations with k-means++ seeding. Deterministic given the rng
/// stream; stops on an assignment fixpoint or after max_iter rounds. An
/// emptied cluster keeps its previous center.
inline Eigen::MatrixXd kmeans(const Eigen::MatrixXd& points, int k,
                              RngStream& rng, int max_iter = 100) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) throw ConfigError("kmeans: need 1 <= k <= #points");

  Eigen::MatrixXd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d2[i] = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick;
    if (total > 0) {
      double u = rng.uniform() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(n));
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.row(i) - centers.row(c)).squaredNorm());
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      counts[assign[i]] += 1;
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
  }
  return centers;
}

namespace detail {

/// Indices of the top `take` scores, descending; ties broken by ascending
/// index so a flat score vector selects deterministically.
inline std::vector<Eigen::Index> rank_desc(const Eigen::VectorXd& scores,
                                           int take) {
  std::vector<Eigen::Index> idx(scores.size());
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(take);
  return idx;
}

}  // namespace detail

/// Picks batch_size of the pool centers: highest predictive variance,
/// highest predictive-mean gradient norm, or uniformly without replacement.
inline Eigen::MatrixXd select_batch(const VariationalPosterior& q,
                                    const Eigen::MatrixXd& pool_centers,
                                    int batch_size, QueryStrategy strategy,
                                    RngStream& rng) {
  const Eigen::Index n = pool_centers.rows();
  if (batch_size < 0 || batch_size > n)
    throw ConfigError("select_batch: batch size exceeds pool");
  std::vector<Eigen::Index> chosen;
  switch (strategy) {
    case QueryStrategy::Variance:
      chosen = detail::rank_desc(q.predictive_variance(pool_centers), batch_size);
      break;
    case QueryStrategy::Gradient: {
      Eigen::VectorXd scores(n);
      for (Eigen::Index i = 0; i < n; ++i)
        scores[i] = q.latent_mean_gradient(pool_centers.row(i).transpose()).norm();
      chosen = detail::rank_desc(scores, batch_size);
      break;
    }
    case QueryStrategy::Random: {
      std::vector<Eigen::Index> idx(n);
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      for (int i = 0; i < batch_size; ++i) {
        const auto j = i + static_cast<Eigen::Index>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
      }
      chosen.assign(idx.begin(), idx.begin() + batch_size);
      break;
    }
  }
  Eigen::MatrixXd out(batch_size, pool_centers.cols());
  for (int i = 0; i < batch_size; ++i) out.row(i) = pool_centers.row(chosen[i]);
  return out;
}

struct QueryResult {
  Dataset data;
  Eigen::MatrixXd selected;  // batch_size x d
  double select_seconds = 0;
  double sim_seconds = 0;
};

/// One active-learning query round: sample a pool, reduce redundancy by
/// clustering, score the cluster centers, then label the selected points by
/// simulation. Clustering and scoring run in normalized coordinates.
inline QueryResult query_new(const VariationalPosterior& q, const CrnModel& model,
                             const PropertyAst& prop, const ParameterSpace& space,
                             const QueryConfig& cfg, int n_traj, double t_end,
                             int threads = 1) {
  cfg.validate();
  if (prop.max_time_bound() > t_end)
    throw RuntimeFailure("property window exceeds simulation horizon");

  QueryResult result;
  result.data.points.resize(0, space.dim());
  if (cfg.batch_size == 0) {
    result.selected.resize(0, space.dim());
    return result;
  }

  const auto t0 = std::chrono::steady_clock::now();
  RngStream pool_rng(cfg.seed, 1);
  RngStream kmeans_rng(cfg.seed, 2);
  RngStream select_rng(cfg.seed, 3);

  const Eigen::MatrixXd pool = sample_pool(space, cfg.pool_size, pool_rng);
  const Eigen::MatrixXd centers_n =
      kmeans(space.normalize_rows(pool), cfg.n_clusters, kmeans_rng);
  Eigen::MatrixXd centers = space.denormalize_rows(centers_n);
  for (Eigen::Index i = 0; i < centers.rows(); ++i)
    centers.row(i) = space.clip(centers.row(i).transpose()).transpose();
  result.selected =
      select_batch(q, centers, cfg.batch_size, cfg.strategy, select_rng);
  const auto t1 = std::chrono::steady_clock::now();

  std::vector<Eigen::VectorXd> points(result.selected.rows());
  for (Eigen::Index i = 0; i < result.selected.rows(); ++i)
    points[i] = result.selected.row(i).transpose();
  const auto trajs = simulate_batch(model, points, n_traj, t_end,
                                    mix64(cfg.seed ^ 0x51A5EEDULL), threads);
  const auto t2 = std::chrono::steady_clock::now();

  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto labels = label_batch(trajs[i], prop);
    for (int y : labels) result.data.append(points[i], y);
  }
  result.select_seconds = std::chrono::duration<double>(t1 - t0).count();
  result.sim_seconds = std::chrono::duration<double>(t2 - t1).count();
  return result;
}

}  // namespace smc
