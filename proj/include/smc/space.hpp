#pragma once

#include <Eigen/Core>
#include <numeric>
#include <vector>

#include "smc/crn.hpp"
#include "smc/errors.hpp"
#include "smc/rng.hpp"

namespace smc {

/// Axis-aligned box of admissible parameter values. The GP layer works on
/// coordinates normalized per-dimension to [0,1]; this struct owns the map.
struct ParameterSpace {
  std::vector<ParamRange> ranges;

  int dim() const { return static_cast<int>(ranges.size()); }

  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const {
    Eigen::VectorXd z(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double w = ranges[i].hi - ranges[i].lo;
      z[i] = w > 0 ? (x[i] - ranges[i].lo) / w : 0.5;
    }
    return z;
  }

  Eigen::VectorXd denormalize(const Eigen::VectorXd& z) const {
    Eigen::VectorXd x(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      x[i] = ranges[i].lo + z[i] * (ranges[i].hi - ranges[i].lo);
    return x;
  }

  Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& xs) const {
    Eigen::MatrixXd out(xs.rows(), xs.cols());
    for (Eigen::Index r = 0; r < xs.rows(); ++r)
      out.row(r) = normalize(xs.row(r).transpose()).transpose();
    return out;
  }

  Eigen::MatrixXd denormalize_rows(const Eigen::MatrixXd& zs) const {
    Eigen::MatrixXd out(zs.rows(), zs.cols());
    for (Eigen::Index r = 0; r < zs.rows(); ++r)
      out.row(r) = denormalize(zs.row(r).transpose()).transpose();
    return out;
  }

  Eigen::VectorXd clip(Eigen::VectorXd x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x[i] < ranges[i].lo) x[i] = ranges[i].lo;
      if (x[i] > ranges[i].hi) x[i] = ranges[i].hi;
    }
    return x;
  }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    if (x.size() != dim()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] < ranges[i].lo - tol || x[i] > ranges[i].hi + tol) return false;
    return true;
  }
};

inline ParameterSpace space_of(const CrnModel& model) {
  return ParameterSpace{model.params};
}

/// Regular grid, dims[i] points per dimension, endpoints included
/// (a single point falls on the range midpoint). First dimension varies
/// slowest. Rows are points in natural units.
inline Eigen::MatrixXd grid_design(const ParameterSpace& space,
                                   const std::vector<int>& dims) {
  if (static_cast<int>(dims.size()) != space.dim())
    throw ConfigError("grid dimension count does not match parameter count");
  long long total = 1;
  for (int g : dims) {
    if (g < 1) throw ConfigError("grid dimensions must be >= 1");
    total *= g;
  }
  Eigen::MatrixXd out(total, space.dim());
  std::vector<int> idx(dims.size(), 0);
  for (long long r = 0; r < total; ++r) {
    for (int d = 0; d < space.dim(); ++d) {
      const auto& range = space.ranges[d];
      out(r, d) = dims[d] == 1 ? 0.5 * (range.lo + range.hi)
                               : range.lo + (range.hi - range.lo) * idx[d] /
                                                (dims[d] - 1);
    }
    for (int d = space.dim() - 1; d >= 0; --d) {
      if (++idx[d] < dims[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

/// n points uniform over the box.
inline Eigen::MatrixXd uniform_design(const ParameterSpace& space, int n,
                                      RngStream& rng) {
  if (n < 1) throw ConfigError("design size must be >= 1");
  Eigen::MatrixXd out(n, space.dim());
  for (int r = 0; r < n; ++r)
    for (int d = 0; d < space.dim(); ++d)
      out(r, d) = rng.uniform(space.ranges[d].lo, space.ranges[d].hi);
  return out;
}

/// Latin hypercube: per dimension an independent random permutation of n
/// strata, one sample inside each stratum.
inline Eigen::MatrixXd lhs_design(const ParameterSpace& space, int n,
                                  RngStream& rng) {
  if (n < 1) throw ConfigError("design size must be >= 1");
  Eigen::MatrixXd out(n, space.dim());
  std::vector<int> perm(n);
  for (int d = 0; d < space.dim(); ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<int>(rng.below(i + 1))]);
    const auto& range = space.ranges[d];
    for (int r = 0; r < n; ++r) {
      const double u = (perm[r] + rng.uniform()) / n;
      out(r, d) = range.lo + (range.hi - range.lo) * u;
    }
  }
  return out;
}

}  // namespace smc
