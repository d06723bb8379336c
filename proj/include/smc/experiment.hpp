#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smc/active.hpp"
#include "smc/crn.hpp"
#include "smc/metrics.hpp"
#include "smc/property.hpp"
#include "smc/space.hpp"
#include "smc/ssa.hpp"
#include "smc/streaming.hpp"
#include "smc/svgp.hpp"
#include "smc/svgp_io.hpp"

namespace smc {

enum class DesignType { Grid, Uniform, Lhs };
enum class InducingType { FromDesign, Grid, KmeansPP };
enum class RunMode { Dense, Sparse, Active };

struct DesignSpec {
  DesignType type = DesignType::Grid;
  std::vector<int> grid_dims{10, 10};
  int n = 100;  // for uniform / lhs
};

struct InducingSpec {
  InducingType type = InducingType::FromDesign;
  std::vector<int> grid_dims{10, 10};
  int k = 100;  // for kmeans++
};

struct ExperimentConfig {
  std::string model_path;
  std::string property_path;
  std::string property_text;
  double t_end = 120;
  DesignSpec design;
  int n_traj = 10;
  InducingSpec inducing;
  int active_iterations = 2;
  bool reselect_inducing = false;  // update_inducing: k-means++ over all data
  QueryConfig query;
  FitOptions fit_options;
  KernelParams kernel;
  std::vector<int> baseline_grid{20, 20};
  int baseline_runs = 2000;
  std::vector<int> eval_grid{20, 20};
  std::uint64_t seed = 0;
  int threads = 1;
};

namespace detail {

// Fixed offsets so each phase draws from an independent stream and can be
// reproduced in isolation.
enum : std::uint64_t {
  kSeedDesign = 1,
  kSeedInitialSim = 2,
  kSeedQuery = 3,
  kSeedInducing = 4,
  kSeedBaseline = 5,
};

inline std::uint64_t phase_seed(std::uint64_t master, std::uint64_t phase,
                                std::uint64_t iter = 0) {
  return mix64(mix64(master + phase * 0x9E3779B97F4A7C15ULL) + iter);
}

inline Eigen::MatrixXd unique_rows(const Eigen::MatrixXd& pts) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    bool seen = false;
    for (Eigen::Index j : keep)
      if (pts.row(i) == pts.row(j)) {
        seen = true;
        break;
      }
    if (!seen) keep.push_back(i);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), pts.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(i) = pts.row(keep[i]);
  return out;
}

class Stopwatch {
 public:
  void start() { t0_ = std::chrono::steady_clock::now(); }
  double stop() {
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace detail

inline Eigen::MatrixXd design_points(const ParameterSpace& space,
                                     const DesignSpec& spec,
                                     std::uint64_t seed) {
  switch (spec.type) {
    case DesignType::Grid:
      return grid_design(space, spec.grid_dims);
    case DesignType::Uniform: {
      RngStream rng(seed);
      return uniform_design(space, spec.n, rng);
    }
    case DesignType::Lhs: {
      RngStream rng(seed);
      return lhs_design(space, spec.n, rng);
    }
  }
  throw ConfigError("bad design type");
}

/// Simulates n_traj trajectories at every design point and labels them.
inline Dataset generate_initial_data(const CrnModel& model,
                                     const PropertyAst& prop,
                                     const ParameterSpace& space,
                                     const Eigen::MatrixXd& design, int n_traj,
                                     double t_end, std::uint64_t sim_seed,
                                     int threads = 1) {
  if (prop.max_time_bound() > t_end)
    throw ConfigError("property window exceeds simulation horizon");
  (void)space;
  std::vector<Eigen::VectorXd> points(design.rows());
  for (Eigen::Index i = 0; i < design.rows(); ++i)
    points[i] = design.row(i).transpose();
  const auto trajs = simulate_batch(model, points, n_traj, t_end, sim_seed, threads);
  Dataset data;
  data.points.resize(0, design.cols());
  for (std::size_t i = 0; i < trajs.size(); ++i)
    for (const int y : label_batch(trajs[i], prop)) data.append(points[i], y);
  return data;
}

/// Per-point Monte-Carlo estimate of the satisfaction probability on a
/// regular grid. Trajectory (i, j) uses stream i*runs + j, so the surface
/// is reproducible for any thread count; trajectories are discarded after
/// checking, keeping memory flat.
inline Surface naive_baseline(const CrnModel& model, const PropertyAst& prop,
                              const std::vector<int>& grid_dims,
                              int runs_per_point, double t_end,
                              std::uint64_t seed, int threads = 1) {
  if (runs_per_point < 1) throw ConfigError("baseline needs runs >= 1");
  if (prop.max_time_bound() > t_end)
    throw ConfigError("property window exceeds simulation horizon");
  const ParameterSpace space = space_of(model);
  const Eigen::MatrixXd grid = grid_design(space, grid_dims);
  Eigen::VectorXd values(grid.rows());
  const std::uint64_t base = detail::phase_seed(seed, detail::kSeedBaseline);
  parallel_for(static_cast<std::size_t>(grid.rows()), threads, [&](std::size_t i) {
    const Eigen::VectorXd point = grid.row(static_cast<Eigen::Index>(i)).transpose();
    long hits = 0;
    for (int j = 0; j < runs_per_point; ++j) {
      const auto traj = simulate(
          model, point, t_end,
          RngStream(base, static_cast<std::uint64_t>(i) * runs_per_point + j));
      hits += detail::eval_top(traj, prop) ? 1 : 0;
    }
    values[static_cast<Eigen::Index>(i)] = static_cast<double>(hits) / runs_per_point;
  });
  Surface s;
  s.points = grid;
  s.values = values;
  return s;
}

struct IterationRecord {
  Eigen::Index new_observations = 0;
  std::vector<double> elbo_trace;
  Surface surface;
};

struct RunReport {
  std::string method;
  ExperimentConfig config;
  VariationalPosterior posterior;
  Surface surface;  // final evaluation surface (mean + predictive variance)
  std::vector<IterationRecord> iterations;
  Eigen::Index total_observations = 0;
  PhaseTimings timings;
};

inline Surface predict_surface(const VariationalPosterior& q,
                               const Eigen::MatrixXd& pts, int quad_nodes = 32) {
  Surface s;
  s.points = pts;
  s.values = q.predict_probability(pts);
  s.variance = q.predictive_variance(pts, quad_nodes);
  return s;
}

namespace detail {

inline Eigen::MatrixXd choose_inducing(const ParameterSpace& space,
                                       const InducingSpec& spec,
                                       const Eigen::MatrixXd& design,
                                       std::uint64_t seed) {
  switch (spec.type) {
    case InducingType::FromDesign:
      return unique_rows(design);
    case InducingType::Grid:
      return grid_design(space, spec.grid_dims);
    case InducingType::KmeansPP: {
      RngStream rng(seed);
      const Eigen::MatrixXd uniq = unique_rows(design);
      return space.denormalize_rows(
          kmeans(space.normalize_rows(uniq), spec.k, rng));
    }
  }
  throw ConfigError("bad inducing type");
}

}  // namespace detail

/// Shared experiment driver: initial design -> fit, then (active mode) the
/// query/update loop with inducing points held fixed unless
/// reselect_inducing is set.
inline RunReport run_experiment(const CrnModel& model, const PropertyAst& prop,
                                const ExperimentConfig& cfg, RunMode mode) {
  if (prop.max_time_bound() > cfg.t_end)
    throw ConfigError("property window exceeds simulation horizon");
  const ParameterSpace space = space_of(model);
  detail::Stopwatch total_clock, clock;
  total_clock.start();
  PhaseTimings timings;

  const Eigen::MatrixXd design = design_points(
      space, cfg.design, detail::phase_seed(cfg.seed, detail::kSeedDesign));

  clock.start();
  Dataset data = generate_initial_data(
      model, prop, space, design, cfg.n_traj, cfg.t_end,
      detail::phase_seed(cfg.seed, detail::kSeedInitialSim), cfg.threads);
  timings.simulation += clock.stop();

  InducingSpec ispec = cfg.inducing;
  if (mode == RunMode::Dense) ispec.type = InducingType::FromDesign;
  const Eigen::MatrixXd inducing = detail::choose_inducing(
      space, ispec, design, detail::phase_seed(cfg.seed, detail::kSeedInducing));

  const Eigen::MatrixXd eval_pts = grid_design(space, cfg.eval_grid);

  VariationalPosterior q0 = init_posterior(inducing, space, cfg.kernel);
  clock.start();
  FitResult fitted = fit(q0, data, cfg.fit_options);
  timings.inference += clock.stop();

  std::vector<IterationRecord> iterations;
  iterations.push_back(
      {data.size(), fitted.trace, predict_surface(fitted.posterior, eval_pts,
                                                  cfg.fit_options.quad_nodes)});

  if (mode == RunMode::Active) {
    if (cfg.active_iterations < 1)
      throw ConfigError("active mode needs at least one iteration");
    for (int iter = 1; iter <= cfg.active_iterations; ++iter) {
      QueryConfig qc = cfg.query;
      qc.seed = detail::phase_seed(cfg.seed, detail::kSeedQuery, iter);
      QueryResult qr = query_new(fitted.posterior, model, prop, space, qc,
                                 cfg.n_traj, cfg.t_end, cfg.threads);
      timings.query += qr.select_seconds;
      timings.simulation += qr.sim_seconds;

      Eigen::MatrixXd v = fitted.posterior.inducing();
      if (cfg.reselect_inducing) {
        Dataset all = data;
        all.append(qr.data);
        RngStream rng(detail::phase_seed(cfg.seed, detail::kSeedInducing, iter));
        v = space.denormalize_rows(
            kmeans(space.normalize_rows(detail::unique_rows(all.points)),
                   static_cast<int>(fitted.posterior.num_inducing()), rng));
      }

      clock.start();
      FitResult updated = update(fitted.posterior, qr.data, v, cfg.fit_options);
      timings.inference += clock.stop();

      data.append(qr.data);
      iterations.push_back({qr.data.size(), updated.trace,
                            predict_surface(updated.posterior, eval_pts,
                                            cfg.fit_options.quad_nodes)});
      fitted = std::move(updated);
    }
  }

  timings.total = total_clock.stop();

  RunReport report{
      mode == RunMode::Dense    ? "dense"
      : mode == RunMode::Sparse ? "sparse"
                                : "active-" + to_string(cfg.query.strategy),
      cfg,
      fitted.posterior,
      iterations.back().surface,
      std::move(iterations),
      data.size(),
      timings};
  return report;
}

/// Smoothed model checking with every distinct training point inducing.
inline RunReport run_smoothed(const CrnModel& model, const PropertyAst& prop,
                              const ExperimentConfig& cfg) {
  return run_experiment(model, prop, cfg, RunMode::Dense);
}

/// Sparse smoothed model checking: one fit, m inducing points < n.
inline RunReport run_sparse(const CrnModel& model, const PropertyAst& prop,
                            const ExperimentConfig& cfg) {
  return run_experiment(model, prop, cfg, RunMode::Sparse);
}

/// Active smoothed model checking: initial fit plus query/update rounds.
inline RunReport run_active(const CrnModel& model, const PropertyAst& prop,
                            const ExperimentConfig& cfg) {
  return run_experiment(model, prop, cfg, RunMode::Active);
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_surface_csv(std::ostream& os, const Surface& s) {
  const bool with_variance = s.variance.size() == s.values.size();
  for (Eigen::Index d = 0; d < s.points.cols(); ++d) os << 'x' << (d + 1) << ',';
  os << (with_variance ? "mean,variance" : "estimate") << '\n';
  for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
    for (Eigen::Index d = 0; d < s.points.cols(); ++d)
      os << format_double(s.points(i, d)) << ',';
    os << format_double(s.values[i]);
    if (with_variance) os << ',' << format_double(s.variance[i]);
    os << '\n';
  }
}

inline Surface read_surface_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open surface file '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty surface file", 1, 1);
  const auto cols = split(trim(header), ',');
  int dim = 0;
  while (dim < static_cast<int>(cols.size()) &&
         cols[dim] == "x" + std::to_string(dim + 1))
    ++dim;
  const bool with_variance =
      static_cast<int>(cols.size()) == dim + 2 && cols[dim] == "mean";
  if (!with_variance &&
      !(static_cast<int>(cols.size()) == dim + 1 && cols[dim] == "estimate"))
    throw ParseError("unrecognized surface header '" + header + "'", 1, 1);

  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    if (static_cast<int>(parts.size()) != static_cast<int>(cols.size()))
      throw ParseError("wrong column count", lineno, 1);
    std::vector<double> row;
    for (const auto& p : parts) {
      char* end = nullptr;
      row.push_back(std::strtod(p.c_str(), &end));
      if (*end != '\0') throw ParseError("bad number '" + p + "'", lineno, 1);
    }
    rows.push_back(std::move(row));
  }
  Surface s;
  s.points.resize(static_cast<Eigen::Index>(rows.size()), dim);
  s.values.resize(static_cast<Eigen::Index>(rows.size()));
  if (with_variance) s.variance.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int d = 0; d < dim; ++d) s.points(static_cast<Eigen::Index>(i), d) = rows[i][d];
    s.values[static_cast<Eigen::Index>(i)] = rows[i][dim];
    if (with_variance) s.variance[static_cast<Eigen::Index>(i)] = rows[i][dim + 1];
  }
  return s;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["model"] = c.model_path;
  j["property"] = c.property_text;
  j["t_end"] = c.t_end;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["n_traj"] = c.n_traj;
  j["design"] = {{"type", c.design.type == DesignType::Grid      ? "grid"
                          : c.design.type == DesignType::Uniform ? "uniform"
                                                                 : "lhs"},
                 {"grid", c.design.grid_dims},
                 {"n", c.design.n}};
  j["inducing"] = {
      {"type", c.inducing.type == InducingType::FromDesign ? "from-design"
               : c.inducing.type == InducingType::Grid     ? "grid"
                                                           : "kmeanspp"},
      {"grid", c.inducing.grid_dims},
      {"k", c.inducing.k}};
  j["active"] = {{"iterations", c.active_iterations},
                 {"pool_size", c.query.pool_size},
                 {"n_clusters", c.query.n_clusters},
                 {"batch_size", c.query.batch_size},
                 {"strategy", to_string(c.query.strategy)},
                 {"reselect_inducing", c.reselect_inducing}};
  j["fit"] = {{"max_iterations", c.fit_options.max_iterations},
              {"tolerance", c.fit_options.tolerance},
              {"initial_step", c.fit_options.initial_step},
              {"quad_nodes", c.fit_options.quad_nodes},
              {"patience", c.fit_options.patience}};
  j["kernel"] = {{"length_scale", c.kernel.length_scale},
                 {"jitter", c.kernel.jitter}};
  j["baseline"] = {{"grid", c.baseline_grid}, {"runs", c.baseline_runs}};
  j["eval_grid"] = c.eval_grid;
  return j;
}

inline void write_report(const RunReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/surface.csv");
    if (!out) throw ConfigError("cannot write '" + dir + "/surface.csv'");
    write_surface_csv(out, report.surface);
  }
  for (std::size_t k = 0; k < report.iterations.size(); ++k) {
    std::ofstream out(dir + "/surface_iter" + std::to_string(k) + ".csv");
    write_surface_csv(out, report.iterations[k].surface);
  }
  save_posterior(report.posterior, dir + "/posterior.json");

  nlohmann::json meta;
  meta["method"] = report.method;
  meta["config"] = config_to_json(report.config);
  meta["total_observations"] = report.total_observations;
  meta["timings"] = {{"simulation", report.timings.simulation},
                     {"inference", report.timings.inference},
                     {"query", report.timings.query},
                     {"total", report.timings.total}};
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& it : report.iterations)
    iters.push_back({{"new_observations", it.new_observations},
                     {"elbo_trace", it.elbo_trace}});
  meta["iterations"] = std::move(iters);
  std::ofstream out(dir + "/meta.json");
  if (!out) throw ConfigError("cannot write '" + dir + "/meta.json'");
  out << meta.dump(2) << '\n';
}

/// Loads the pieces of a report directory needed for comparisons.
inline MethodRow read_report_row(const std::string& dir, const Surface& baseline,
                                 double threshold) {
  std::ifstream in(dir + "/meta.json");
  if (!in) throw ConfigError("cannot open '" + dir + "/meta.json'");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad meta.json: ") + e.what());
  }
  MethodRow row;
  row.name = meta.value("method", std::filesystem::path(dir).filename().string());
  const Surface surface = read_surface_csv(dir + "/surface.csv");
  row.metrics = metrics(surface, baseline, threshold);
  const auto& t = meta.at("timings");
  row.timings = {t.value("simulation", 0.0), t.value("inference", 0.0),
                 t.value("query", 0.0), t.value("total", 0.0)};
  return row;
}

}  // namespace smc
