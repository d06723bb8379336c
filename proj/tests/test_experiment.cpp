#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "smc/config.hpp"
#include "smc/experiment.hpp"

namespace {

smc::CrnModel influx_model() {
  return smc::parse_model(
      "species A=0\nparam k range 0.01 1.5\nreaction in: 0 -> A @ k\n");
}

smc::CrnModel sir() {
  return smc::parse_model(
      "species S=95 I=5 R=0\n"
      "param k_I range 0.005 0.3\n"
      "param k_R range 0.005 0.3\n"
      "reaction infect: S + I -> I + I @ k_I\n"
      "reaction recover: I -> R @ k_R\n");
}

TEST(GridDesign, CountsAndEndpoints) {
  const auto space = smc::space_of(sir());
  const auto grid = smc::grid_design(space, {3, 4});
  ASSERT_EQ(grid.rows(), 12);
  EXPECT_DOUBLE_EQ(grid(0, 0), 0.005);
  EXPECT_DOUBLE_EQ(grid(0, 1), 0.005);
  EXPECT_DOUBLE_EQ(grid(11, 0), 0.3);
  EXPECT_DOUBLE_EQ(grid(11, 1), 0.3);
  // first dimension varies slowest
  EXPECT_DOUBLE_EQ(grid(1, 0), 0.005);
  EXPECT_NE(grid(1, 1), grid(0, 1));

  const auto single = smc::grid_design(space, {1, 1});
  EXPECT_DOUBLE_EQ(single(0, 0), 0.5 * (0.005 + 0.3));

  EXPECT_THROW(smc::grid_design(space, {3}), smc::ConfigError);
}

TEST(LhsDesign, StratifiesEveryDimension) {
  smc::ParameterSpace space{{{"a", 0.0, 1.0}, {"b", 2.0, 4.0}}};
  smc::RngStream rng(5);
  const int n = 16;
  const auto pts = smc::lhs_design(space, n, rng);
  for (int d = 0; d < 2; ++d) {
    std::vector<bool> hit(n, false);
    for (int i = 0; i < n; ++i) {
      const double u = (pts(i, d) - space.ranges[d].lo) /
                       (space.ranges[d].hi - space.ranges[d].lo);
      const int stratum = std::min(n - 1, static_cast<int>(u * n));
      EXPECT_FALSE(hit[stratum]) << "dim " << d;
      hit[stratum] = true;
    }
  }
}

TEST(GenerateInitialData, CountsObservations) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto space = smc::space_of(model);
  const auto design = smc::grid_design(space, {7});
  const auto data =
      smc::generate_initial_data(model, prop, space, design, 3, 10.0, 99);
  EXPECT_EQ(data.size(), 21);
}

TEST(GenerateInitialData, SinglePointSingleTrajectory) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto space = smc::space_of(model);
  Eigen::MatrixXd one(1, 1);
  one << 0.7;
  const auto data = smc::generate_initial_data(model, prop, space, one, 1, 10.0, 3);
  EXPECT_EQ(data.size(), 1);
  EXPECT_DOUBLE_EQ(data.points(0, 0), 0.7);
}

TEST(NaiveBaseline, TrivialProperties) {
  const auto model = sir();
  const auto always = smc::parse_property("F[0,10](S >= 0)", model.species);
  const auto never = smc::parse_property("G[0,10](S < 0)", model.species);
  const auto s1 = smc::naive_baseline(model, always, {2, 2}, 3, 20.0, 1);
  const auto s0 = smc::naive_baseline(model, never, {2, 2}, 3, 20.0, 1);
  ASSERT_EQ(s1.values.size(), 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(s1.values[i], 1.0);
    EXPECT_DOUBLE_EQ(s0.values[i], 0.0);
  }
}

TEST(NaiveBaseline, SingleRunGivesBinaryValues) {
  const auto model = sir();
  const auto prop =
      smc::parse_property("G[0,30](I > 0) & F[30,40](I == 0)", model.species);
  const auto s = smc::naive_baseline(model, prop, {2, 2}, 1, 40.0, 7);
  for (int i = 0; i < 4; ++i)
    EXPECT_TRUE(s.values[i] == 0.0 || s.values[i] == 1.0);
}

TEST(NaiveBaseline, ThreadCountDoesNotChangeResult) {
  const auto model = sir();
  const auto prop =
      smc::parse_property("G[0,30](I > 0) & F[30,40](I == 0)", model.species);
  const auto a = smc::naive_baseline(model, prop, {3, 3}, 20, 40.0, 11, 1);
  const auto b = smc::naive_baseline(model, prop, {3, 3}, 20, 40.0, 11, 4);
  EXPECT_EQ((a.values - b.values).cwiseAbs().maxCoeff(), 0.0);
}

smc::ExperimentConfig tiny_active_config() {
  smc::ExperimentConfig cfg;
  cfg.t_end = 10.0;
  cfg.design.type = smc::DesignType::Grid;
  cfg.design.grid_dims = {3};
  cfg.n_traj = 2;
  cfg.inducing.type = smc::InducingType::FromDesign;
  cfg.active_iterations = 2;
  cfg.query.pool_size = 30;
  cfg.query.n_clusters = 12;
  cfg.query.batch_size = 4;
  cfg.query.strategy = smc::QueryStrategy::Variance;
  cfg.fit_options.max_iterations = 150;
  cfg.eval_grid = {9};
  cfg.seed = 31;
  return cfg;
}

TEST(RunActive, BudgetAccountingIsExact) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto cfg = tiny_active_config();
  const auto report = smc::run_active(model, prop, cfg);
  // 3 design points x 2 traj + 2 iterations x (4 points x 2 traj)
  EXPECT_EQ(report.total_observations, 3 * 2 + 2 * 4 * 2);
  ASSERT_EQ(report.iterations.size(), 3u);
  EXPECT_EQ(report.iterations[0].new_observations, 6);
  EXPECT_EQ(report.iterations[1].new_observations, 8);
  EXPECT_EQ(report.iterations[2].new_observations, 8);
  EXPECT_EQ(report.method, "active-variance");
  EXPECT_LE(report.timings.simulation + report.timings.inference +
                report.timings.query,
            report.timings.total + 1e-6);
  for (int i = 0; i < report.surface.values.size(); ++i) {
    EXPECT_GE(report.surface.values[i], 0.0);
    EXPECT_LE(report.surface.values[i], 1.0);
  }
}

TEST(RunActive, InducingReselectionHook) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  auto cfg = tiny_active_config();
  cfg.reselect_inducing = true;
  const auto report = smc::run_active(model, prop, cfg);
  EXPECT_EQ(report.posterior.num_inducing(), 3);
  // reselected centers come from the accumulated data, not the design grid
  const auto fixed = smc::run_active(model, prop, tiny_active_config());
  EXPECT_GT((report.posterior.inducing() - fixed.posterior.inducing())
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  for (int i = 0; i < report.surface.values.size(); ++i) {
    EXPECT_GE(report.surface.values[i], 0.0);
    EXPECT_LE(report.surface.values[i], 1.0);
  }
}

TEST(RunActive, DeterministicGivenConfig) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto cfg = tiny_active_config();
  const auto a = smc::run_active(model, prop, cfg);
  const auto b = smc::run_active(model, prop, cfg);
  EXPECT_EQ((a.surface.values - b.surface.values).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.surface.variance - b.surface.variance).cwiseAbs().maxCoeff(), 0.0);
}

TEST(RunSparse, MatchesDenseWhenInducingEqualsDesign) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  smc::ExperimentConfig cfg = tiny_active_config();
  cfg.inducing.type = smc::InducingType::FromDesign;
  const auto sparse = smc::run_sparse(model, prop, cfg);
  const auto dense = smc::run_smoothed(model, prop, cfg);
  EXPECT_LT((sparse.surface.values - dense.surface.values).cwiseAbs().maxCoeff(),
            1e-6);
  EXPECT_EQ(sparse.iterations.size(), 1u);
  EXPECT_EQ(dense.method, "dense");
}

TEST(RunSmoothed, DegenerateSinglePointRun) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  smc::ExperimentConfig cfg;
  cfg.t_end = 10.0;
  cfg.design.grid_dims = {1};
  cfg.n_traj = 1;
  cfg.eval_grid = {5};
  cfg.fit_options.max_iterations = 100;
  const auto report = smc::run_smoothed(model, prop, cfg);
  EXPECT_EQ(report.total_observations, 1);
  EXPECT_EQ(report.posterior.num_inducing(), 1);
  EXPECT_EQ(report.surface.values.size(), 5);
}

TEST(RunActive, RequiresAtLeastOneIteration) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  auto cfg = tiny_active_config();
  cfg.active_iterations = 0;
  EXPECT_THROW(smc::run_active(model, prop, cfg), smc::ConfigError);
}

TEST(RunActive, ZeroBatchKeepsSurfaceFixed) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  auto cfg = tiny_active_config();
  cfg.query.batch_size = 0;
  cfg.query.n_clusters = 1;
  const auto report = smc::run_active(model, prop, cfg);
  ASSERT_EQ(report.iterations.size(), 3u);
  const auto& s0 = report.iterations[0].surface.values;
  const auto& s2 = report.iterations[2].surface.values;
  EXPECT_LT((s0 - s2).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(ReportIo, SurfaceCsvRoundTrip) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto report = smc::run_sparse(model, prop, tiny_active_config());

  const std::string dir = "report_io_test";
  std::filesystem::remove_all(dir);
  smc::write_report(report, dir);
  EXPECT_TRUE(std::filesystem::exists(dir + "/surface.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/meta.json"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/posterior.json"));

  const auto surface = smc::read_surface_csv(dir + "/surface.csv");
  EXPECT_EQ((surface.points - report.surface.points).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((surface.values - report.surface.values).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((surface.variance - report.surface.variance).cwiseAbs().maxCoeff(), 0.0);

  const auto q = smc::load_posterior(dir + "/posterior.json");
  EXPECT_EQ((q.mu() - report.posterior.mu()).cwiseAbs().maxCoeff(), 0.0);

  const auto row = smc::read_report_row(dir, report.surface, 0.02);
  EXPECT_EQ(row.name, "sparse");
  EXPECT_DOUBLE_EQ(row.metrics.error_mean, 0.0);
  std::filesystem::remove_all(dir);
}

TEST(ReportIo, BaselineCsvUsesEstimateHeader) {
  const auto model = sir();
  const auto prop = smc::parse_property("F[0,10](S >= 0)", model.species);
  const auto s = smc::naive_baseline(model, prop, {2, 2}, 2, 20.0, 1);
  std::ostringstream os;
  smc::write_surface_csv(os, s);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "x1,x2,estimate");
  std::ofstream("baseline_io_test.csv") << os.str();
  const auto back = smc::read_surface_csv("baseline_io_test.csv");
  EXPECT_EQ(back.variance.size(), 0);
  EXPECT_EQ((back.values - s.values).cwiseAbs().maxCoeff(), 0.0);
  std::filesystem::remove("baseline_io_test.csv");
}

TEST(Config, ParsesFullFile) {
  const std::string text = R"(
model = sir.crn
property = G[0,100](I > 0) & F[100,120](I == 0)
t_end = 120
seed = 17
threads = 2

[design]
type = grid
grid = 10x10
n_traj = 10

[inducing]
type = grid
grid = 5x5

[kernel]
length_scale = 0.05
jitter = 1e-6

[fit]
max_iterations = 300
tolerance = 1e-7

[active]
iterations = 2
pool_size = 500
n_clusters = 100
batch_size = 50
strategy = gradient

[baseline]
grid = 20x20
runs = 2000

[eval]
grid = 12x12
)";
  const auto cfg = smc::parse_experiment_config(text);
  EXPECT_EQ(cfg.model_path, "sir.crn");
  EXPECT_EQ(cfg.property_text, "G[0,100](I > 0) & F[100,120](I == 0)");
  EXPECT_DOUBLE_EQ(cfg.t_end, 120);
  EXPECT_EQ(cfg.seed, 17u);
  EXPECT_EQ(cfg.threads, 2);
  EXPECT_EQ(cfg.design.grid_dims, (std::vector<int>{10, 10}));
  EXPECT_EQ(cfg.n_traj, 10);
  EXPECT_EQ(cfg.inducing.type, smc::InducingType::Grid);
  EXPECT_EQ(cfg.inducing.grid_dims, (std::vector<int>{5, 5}));
  EXPECT_DOUBLE_EQ(cfg.kernel.length_scale, 0.05);
  EXPECT_EQ(cfg.fit_options.max_iterations, 300);
  EXPECT_EQ(cfg.active_iterations, 2);
  EXPECT_EQ(cfg.query.strategy, smc::QueryStrategy::Gradient);
  EXPECT_EQ(cfg.baseline_grid, (std::vector<int>{20, 20}));
  EXPECT_EQ(cfg.eval_grid, (std::vector<int>{12, 12}));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(smc::parse_grid_spec("20x"), smc::ConfigError);
  EXPECT_THROW(smc::parse_grid_spec("x20"), smc::ConfigError);
  EXPECT_THROW(smc::parse_grid_spec("0x5"), smc::ConfigError);
  EXPECT_THROW(smc::parse_experiment_config("nonsense = 1\n"), smc::ConfigError);
  EXPECT_THROW(smc::parse_experiment_config("[design]\nbogus = 1\n"),
               smc::ConfigError);
  EXPECT_THROW(smc::parse_experiment_config("[fit]\ntolerance = -1\n"),
               smc::ConfigError);
  try {
    smc::parse_experiment_config("t_end = 120\n\n[design]\ntype = banana\n");
    FAIL() << "expected ConfigError";
  } catch (const smc::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

}  // namespace
