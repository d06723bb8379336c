// smcheck: smoothed statistical model checking for parametric CTMCs.
//
// Subcommands:
//   simulate  sample trajectories at one parameter point, dump CSVs
//   baseline  naive Monte-Carlo satisfaction surface on a grid
//   smc       dense / sparse / active smoothed model checking runs
//   compare   accuracy + timing table of report dirs against a baseline
//
// Exit codes: 0 ok, 1 input parse error, 2 invalid configuration,
// 3 runtime / empty-result error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "smc/config.hpp"
#include "smc/experiment.hpp"

namespace {

Eigen::VectorXd parse_point(const std::string& text, const smc::ParameterSpace& space) {
  const auto parts = smc::split(text, ',');
  if (static_cast<int>(parts.size()) != space.dim())
    throw smc::ConfigError("--point needs " + std::to_string(space.dim()) +
                           " comma-separated values");
  Eigen::VectorXd point(space.dim());
  for (int i = 0; i < space.dim(); ++i) {
    char* end = nullptr;
    point[i] = std::strtod(parts[i].c_str(), &end);
    if (parts[i].empty() || *end != '\0')
      throw smc::ConfigError("bad coordinate '" + parts[i] + "' in --point");
  }
  if (!space.contains(point))
    throw smc::ConfigError("--point lies outside the declared parameter ranges");
  return point;
}

struct SimulateArgs {
  std::string model_path;
  std::string point;
  double t_end = 120;
  std::uint64_t seed = 0;
  int traj = 1;
  std::string out_dir = ".";
  std::string prefix = "trajectory";
};

int run_simulate(const SimulateArgs& a) {
  const smc::CrnModel model = smc::parse_model(smc::read_text_file(a.model_path));
  const smc::ParameterSpace space = smc::space_of(model);
  const Eigen::VectorXd point = parse_point(a.point, space);
  if (a.t_end <= 0) throw smc::ConfigError("--t-end must be positive");
  if (a.traj < 1) throw smc::ConfigError("--traj must be >= 1");
  std::filesystem::create_directories(a.out_dir);
  for (int stream = 0; stream < a.traj; ++stream) {
    const auto traj =
        smc::simulate(model, point, a.t_end, smc::RngStream(a.seed, stream));
    const std::string path =
        a.out_dir + "/" + a.prefix + "_" + std::to_string(stream) + ".csv";
    std::ofstream out(path);
    if (!out) throw smc::ConfigError("cannot write '" + path + "'");
    smc::write_trajectory_csv(out, traj, model);
    std::cout << path << " (" << traj.times.size() << " jumps)\n";
  }
  return 0;
}

struct BaselineArgs {
  std::string model_path;
  std::string property_text;
  std::string property_file;
  std::string grid = "20x20";
  int runs = 2000;
  double t_end = 120;
  std::uint64_t seed = 0;
  int threads = smc::default_threads();
  std::string out = "baseline.csv";
};

int run_baseline(const BaselineArgs& a) {
  const smc::CrnModel model = smc::parse_model(smc::read_text_file(a.model_path));
  std::string prop_text = a.property_text;
  if (prop_text.empty()) {
    if (a.property_file.empty())
      throw smc::ConfigError("need --property or --property-file");
    prop_text = smc::trim(smc::read_text_file(a.property_file));
  }
  const smc::PropertyAst prop = smc::parse_property(prop_text, model.species);
  const auto dims = smc::parse_grid_spec(a.grid);
  const smc::Surface surface = smc::naive_baseline(model, prop, dims, a.runs,
                                                   a.t_end, a.seed, a.threads);
  std::ofstream out(a.out);
  if (!out) throw smc::ConfigError("cannot write '" + a.out + "'");
  smc::write_surface_csv(out, surface);
  std::cout << a.out << " (" << surface.points.rows() << " grid points, "
            << a.runs << " runs each)\n";
  return 0;
}

struct SmcArgs {
  std::string config_path;
  std::string mode;
  std::string query;
  std::string out;
  std::int64_t seed = -1;
  int threads = 0;
};

int run_smc(const SmcArgs& a) {
  smc::ExperimentConfig cfg = smc::load_config_file(a.config_path);
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.threads > 0) cfg.threads = a.threads;
  if (!a.query.empty()) cfg.query.strategy = smc::parse_strategy(a.query);
  auto [model, prop] = smc::resolve_experiment_inputs(cfg);

  smc::RunMode mode;
  if (a.mode == "dense") mode = smc::RunMode::Dense;
  else if (a.mode == "sparse") mode = smc::RunMode::Sparse;
  else if (a.mode == "active") mode = smc::RunMode::Active;
  else throw smc::ConfigError("unknown mode '" + a.mode + "'");

  const smc::RunReport report = smc::run_experiment(model, prop, cfg, mode);
  std::string out_dir = a.out;
  if (out_dir.empty()) out_dir = "report-" + report.method;
  smc::write_report(report, out_dir);

  std::cout << report.method << ": " << report.total_observations
            << " observations, " << report.posterior.num_inducing()
            << " inducing points\n"
            << "  timings[s]: ssa " << report.timings.simulation
            << ", inference " << report.timings.inference << ", query "
            << report.timings.query << ", total " << report.timings.total << '\n'
            << "  report written to " << out_dir << '\n';
  return 0;
}

struct CompareArgs {
  std::string baseline_path;
  std::vector<std::string> reports;
  double threshold = 0.02;
  std::string out;
};

int run_compare(const CompareArgs& a) {
  const smc::Surface baseline = smc::read_surface_csv(a.baseline_path);
  std::vector<smc::MethodRow> rows;
  for (const auto& dir : a.reports)
    rows.push_back(smc::read_report_row(dir, baseline, a.threshold));
  const std::string table = smc::comparison_table(rows);
  std::cout << table;
  if (!a.out.empty()) {
    std::ofstream csv(a.out + ".csv");
    if (!csv) throw smc::ConfigError("cannot write '" + a.out + ".csv'");
    smc::write_comparison_csv(csv, rows);
    std::ofstream txt(a.out + ".txt");
    txt << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smoothed statistical model checking for parametric CTMCs"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Sample trajectories at one point");
  sim_cmd->add_option("--model", sim.model_path, "Model file (.crn)")->required();
  sim_cmd->add_option("--point", sim.point, "Comma-separated parameter values")
      ->required();
  sim_cmd->add_option("--t-end", sim.t_end, "Simulation horizon");
  sim_cmd->add_option("--seed", sim.seed, "Base seed");
  sim_cmd->add_option("--traj", sim.traj, "Number of trajectories");
  sim_cmd->add_option("--out-dir", sim.out_dir, "Output directory");
  sim_cmd->add_option("--prefix", sim.prefix, "Output file prefix");

  BaselineArgs base;
  auto* base_cmd =
      app.add_subcommand("baseline", "Naive Monte-Carlo satisfaction surface");
  base_cmd->add_option("--model", base.model_path, "Model file (.crn)")->required();
  base_cmd->add_option("--property", base.property_text, "Property formula");
  base_cmd->add_option("--property-file", base.property_file, "Property file");
  base_cmd->add_option("--grid", base.grid, "Grid spec, e.g. 20x20");
  base_cmd->add_option("--runs", base.runs, "Simulation runs per grid point");
  base_cmd->add_option("--t-end", base.t_end, "Simulation horizon");
  base_cmd->add_option("--seed", base.seed, "Base seed");
  base_cmd->add_option("--threads", base.threads, "Simulation threads");
  base_cmd->add_option("--out", base.out, "Output CSV path");

  SmcArgs smc_args;
  auto* smc_cmd = app.add_subcommand("smc", "Smoothed model checking run");
  smc_cmd->add_option("--config", smc_args.config_path, "Experiment config file")
      ->required();
  smc_cmd->add_option("--mode", smc_args.mode, "dense | sparse | active")
      ->required()
      ->check(CLI::IsMember({"dense", "sparse", "active"}));
  smc_cmd->add_option("--query", smc_args.query, "variance | gradient | random")
      ->check(CLI::IsMember({"variance", "gradient", "random"}));
  smc_cmd->add_option("--out", smc_args.out, "Report directory");
  smc_cmd->add_option("--seed", smc_args.seed, "Override master seed");
  smc_cmd->add_option("--threads", smc_args.threads, "Override thread count");

  CompareArgs cmp;
  auto* cmp_cmd =
      app.add_subcommand("compare", "Compare report dirs against a baseline");
  cmp_cmd->add_option("--baseline", cmp.baseline_path, "Baseline surface CSV")
      ->required();
  cmp_cmd->add_option("--report", cmp.reports, "Report directory (repeatable)")
      ->required();
  cmp_cmd->add_option("--threshold", cmp.threshold, "Baseline threshold");
  cmp_cmd->add_option("--out", cmp.out, "Output prefix for .csv/.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (base_cmd->parsed()) return run_baseline(base);
    if (smc_cmd->parsed()) return run_smc(smc_args);
    if (cmp_cmd->parsed()) return run_compare(cmp);
  } catch (const smc::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const smc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
