#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "smc/errors.hpp"
#include "smc/text.hpp"

namespace smc {

/// Prediction or estimate surface over a point set. `variance` is empty for
/// surfaces that carry only point estimates (the naive baseline).
struct Surface {
  Eigen::MatrixXd points;   // N x d
  Eigen::VectorXd values;   // N
  Eigen::VectorXd variance; // N or empty
};

struct ErrorMetrics {
  double error_mean = 0;  // mean of |predicted - baseline|
  double error_std = 0;   // population std of the absolute errors
  double error_max = 0;
  double rmse = 0;
  int retained = 0;  // points with baseline value > threshold
};

/// Accuracy of a predicted surface against the naive baseline, restricted
/// to points where the baseline exceeds `threshold` (the flat regions carry
/// no information). rmse = sqrt(mean of squared differences), so
/// rmse <= error_max always holds on the same retained set.
inline ErrorMetrics metrics(const Surface& predicted, const Surface& baseline,
                            double threshold) {
  if (predicted.points.rows() != baseline.points.rows())
    throw ConfigError("metrics: surfaces use different grids");
  for (Eigen::Index i = 0; i < predicted.points.rows(); ++i)
    if (!predicted.points.row(i).isApprox(baseline.points.row(i), 1e-9))
      throw ConfigError("metrics: surfaces use different grids");

  ErrorMetrics m;
  double sum = 0, sum_sq = 0;
  for (Eigen::Index i = 0; i < baseline.values.size(); ++i) {
    if (!(baseline.values[i] > threshold)) continue;
    const double err = std::abs(predicted.values[i] - baseline.values[i]);
    ++m.retained;
    sum += err;
    sum_sq += err * err;
    m.error_max = std::max(m.error_max, err);
  }
  if (m.retained == 0)
    throw RuntimeFailure("metrics: no baseline points above threshold");
  m.error_mean = sum / m.retained;
  m.rmse = std::sqrt(sum_sq / m.retained);
  m.error_std = std::sqrt(std::max(sum_sq / m.retained - m.error_mean * m.error_mean, 0.0));
  return m;
}

struct PhaseTimings {
  double simulation = 0;
  double inference = 0;
  double query = 0;
  double total = 0;
};

struct MethodRow {
  std::string name;
  ErrorMetrics metrics;
  PhaseTimings timings;
};

/// Aligned plain-text table, one row per method.
inline std::string comparison_table(const std::vector<MethodRow>& rows) {
  if (rows.empty()) throw RuntimeFailure("comparison_table: no reports given");
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %14s %8s %8s %8s %9s %8s %8s\n",
                "method", "err mean/std", "max", "rmse", "ssa[s]", "infer[s]",
                "query[s]", "total[s]");
  out += line;
  for (const auto& r : rows) {
    char pair[40];
    std::snprintf(pair, sizeof(pair), "(%.3f, %.3f)", r.metrics.error_mean,
                  r.metrics.error_std);
    std::snprintf(line, sizeof(line),
                  "%-28s %14s %8.3f %8.3f %8.2f %9.2f %8.2f %8.2f\n",
                  r.name.c_str(), pair, r.metrics.error_max, r.metrics.rmse,
                  r.timings.simulation, r.timings.inference, r.timings.query,
                  r.timings.total);
    out += line;
  }
  return out;
}

inline void write_comparison_csv(std::ostream& os,
                                 const std::vector<MethodRow>& rows) {
  if (rows.empty()) throw RuntimeFailure("write_comparison_csv: no reports given");
  os << "method,error_mean,error_std,error_max,rmse,retained,ssa_s,inference_s,"
        "query_s,total_s\n";
  for (const auto& r : rows) {
    os << r.name << ',' << format_double(r.metrics.error_mean) << ','
       << format_double(r.metrics.error_std) << ','
       << format_double(r.metrics.error_max) << ','
       << format_double(r.metrics.rmse) << ',' << r.metrics.retained << ','
       << format_double(r.timings.simulation) << ','
       << format_double(r.timings.inference) << ','
       << format_double(r.timings.query) << ','
       << format_double(r.timings.total) << '\n';
  }
}

}  // namespace smc
