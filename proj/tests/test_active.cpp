#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "smc/active.hpp"
#include "smc/experiment.hpp"

namespace {

smc::CrnModel influx_model(double lo = 0.01, double hi = 1.5) {
  return smc::parse_model("species A=0\nparam k range " + smc::format_double(lo) +
                          " " + smc::format_double(hi) +
                          "\nreaction in: 0 -> A @ k\n");
}

Eigen::MatrixXd col(std::initializer_list<double> xs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

TEST(SamplePool, DegenerateBoxYieldsCorner) {
  smc::ParameterSpace space{{{"a", 2.0, 2.0}, {"b", -1.0, -1.0}}};
  smc::RngStream rng(1);
  const auto pool = smc::sample_pool(space, 1, rng);
  ASSERT_EQ(pool.rows(), 1);
  EXPECT_DOUBLE_EQ(pool(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(pool(0, 1), -1.0);
}

TEST(SamplePool, UniformMeansNearCenter) {
  smc::ParameterSpace space{{{"a", 0.0, 1.0}, {"b", 0.0, 1.0}}};
  smc::RngStream rng(2);
  const auto pool = smc::sample_pool(space, 1000, rng);
  EXPECT_NEAR(pool.col(0).mean(), 0.5, 0.03);
  EXPECT_NEAR(pool.col(1).mean(), 0.5, 0.03);
}

TEST(SamplePool, DeterministicGivenSeed) {
  smc::ParameterSpace space{{{"a", 0.0, 1.0}}};
  smc::RngStream r1(7), r2(7), r3(8);
  const auto a = smc::sample_pool(space, 50, r1);
  const auto b = smc::sample_pool(space, 50, r2);
  const auto c = smc::sample_pool(space, 50, r3);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((a - c).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Kmeans, AllPointsWhenKEqualsN) {
  smc::RngStream rng(3);
  Eigen::MatrixXd pts(10, 2);
  for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform();
  smc::RngStream krng(4);
  const auto centers = smc::kmeans(pts, 10, krng);
  ASSERT_EQ(centers.rows(), 10);
  for (int i = 0; i < 10; ++i) {
    bool found = false;
    for (int j = 0; j < 10; ++j)
      if (pts.row(i) == centers.row(j)) found = true;
    EXPECT_TRUE(found) << "input point " << i << " missing from centers";
  }
}

TEST(Kmeans, SingleClusterIsCentroid) {
  smc::RngStream rng(5);
  Eigen::MatrixXd pts(25, 2);
  for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform();
  smc::RngStream krng(6);
  const auto centers = smc::kmeans(pts, 1, krng);
  EXPECT_TRUE(centers.row(0).isApprox(pts.colwise().mean(), 1e-12));
}

TEST(Kmeans, RecoversSeparatedBlobs) {
  smc::RngStream rng(7);
  Eigen::MatrixXd pts(100, 2);
  for (int i = 0; i < 50; ++i)
    for (int d = 0; d < 2; ++d) pts(i, d) = 0.2 + 0.05 * (rng.uniform() - 0.5);
  for (int i = 50; i < 100; ++i)
    for (int d = 0; d < 2; ++d) pts(i, d) = 0.8 + 0.05 * (rng.uniform() - 0.5);
  smc::RngStream krng(8);
  auto centers = smc::kmeans(pts, 2, krng);
  if (centers(0, 0) > centers(1, 0)) centers.row(0).swap(centers.row(1));
  EXPECT_NEAR(centers(0, 0), 0.2, 0.05);
  EXPECT_NEAR(centers(0, 1), 0.2, 0.05);
  EXPECT_NEAR(centers(1, 0), 0.8, 0.05);
  EXPECT_NEAR(centers(1, 1), 0.8, 0.05);
}

TEST(Kmeans, DeterministicAndValidatesK) {
  smc::RngStream rng(9);
  Eigen::MatrixXd pts(20, 1);
  for (int i = 0; i < 20; ++i) pts(i, 0) = rng.uniform();
  smc::RngStream k1(10), k2(10);
  EXPECT_EQ((smc::kmeans(pts, 5, k1) - smc::kmeans(pts, 5, k2)).cwiseAbs().maxCoeff(),
            0.0);
  smc::RngStream k3(10);
  EXPECT_THROW(smc::kmeans(pts, 21, k3), smc::ConfigError);
}

TEST(SelectBatch, FlatPosteriorFallsBackToIndexOrder) {
  smc::ParameterSpace space{{{"x", 0.0, 1.0}}};
  const auto q = smc::init_posterior(col({0.2, 0.8}), space, {});
  Eigen::MatrixXd centers(6, 1);
  centers << 0.9, 0.1, 0.5, 0.3, 0.7, 0.2;
  smc::RngStream rng(11);
  // mu = 0 so alpha = 0: all gradient scores are exactly zero
  const auto sel =
      smc::select_batch(q, centers, 3, smc::QueryStrategy::Gradient, rng);
  ASSERT_EQ(sel.rows(), 3);
  EXPECT_DOUBLE_EQ(sel(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(sel(1, 0), 0.1);
  EXPECT_DOUBLE_EQ(sel(2, 0), 0.5);
}

TEST(SelectBatch, GradientConcentratesOnSteepRegion) {
  smc::ParameterSpace space{{{"x", 0.0, 1.0}}};
  auto q = smc::init_posterior(col({0.4, 0.6}), space, {0.05, 1e-6});
  Eigen::VectorXd mu(2);
  mu << -2.0, 2.0;  // latent rises sharply around x = 0.5
  q.set_variational(mu, 0.1 * Eigen::MatrixXd::Identity(2, 2));

  Eigen::MatrixXd centers(41, 1);
  for (int i = 0; i < 41; ++i) centers(i, 0) = i / 40.0;
  smc::RngStream g_rng(12), r_rng(13);
  const auto grad_sel =
      smc::select_batch(q, centers, 8, smc::QueryStrategy::Gradient, g_rng);
  const auto rand_sel =
      smc::select_batch(q, centers, 8, smc::QueryStrategy::Random, r_rng);

  auto median_dist = [](const Eigen::MatrixXd& sel) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < sel.rows(); ++i)
      d.push_back(std::abs(sel(i, 0) - 0.5));
    std::sort(d.begin(), d.end());
    return d[d.size() / 2];
  };
  EXPECT_LT(median_dist(grad_sel), median_dist(rand_sel));
  EXPECT_LT(median_dist(grad_sel), 0.15);
}

TEST(SelectBatch, RandomIsWithoutReplacement) {
  smc::ParameterSpace space{{{"x", 0.0, 1.0}}};
  const auto q = smc::init_posterior(col({0.5}), space, {});
  Eigen::MatrixXd centers(10, 1);
  for (int i = 0; i < 10; ++i) centers(i, 0) = i / 10.0;
  smc::RngStream rng(14);
  const auto sel = smc::select_batch(q, centers, 10, smc::QueryStrategy::Random, rng);
  std::vector<double> values(sel.data(), sel.data() + 10);
  std::sort(values.begin(), values.end());
  EXPECT_EQ(std::unique(values.begin(), values.end()), values.end());
}

TEST(QueryNew, ShapeSeedsAndDistinctness) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto space = smc::space_of(model);
  const auto q = smc::init_posterior(smc::grid_design(space, {12}), space, {});

  smc::QueryConfig cfg;
  cfg.pool_size = 200;
  cfg.n_clusters = 40;
  cfg.batch_size = 10;
  cfg.strategy = smc::QueryStrategy::Variance;
  cfg.seed = 77;

  const auto r1 = smc::query_new(q, model, prop, space, cfg, 5, 10.0);
  const auto r2 = smc::query_new(q, model, prop, space, cfg, 5, 10.0);
  EXPECT_EQ(r1.data.size(), 50);
  EXPECT_EQ(r1.selected.rows(), 10);
  EXPECT_EQ((r1.selected - r2.selected).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((r1.data.points - r2.data.points).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((r1.data.labels - r2.data.labels).cwiseAbs().maxCoeff(), 0);

  // selected points are pairwise distinct cluster centers inside the box
  for (Eigen::Index i = 0; i < r1.selected.rows(); ++i) {
    EXPECT_TRUE(space.contains(r1.selected.row(i).transpose()));
    for (Eigen::Index j = 0; j < i; ++j)
      EXPECT_NE(r1.selected(i, 0), r1.selected(j, 0));
  }

  // each selected point contributes exactly n_traj labeled rows
  for (Eigen::Index i = 0; i < r1.selected.rows(); ++i)
    for (int t = 0; t < 5; ++t)
      EXPECT_EQ(r1.data.points(i * 5 + t, 0), r1.selected(i, 0));
}

TEST(QueryNew, FlatRegionYieldsAllZeroLabels) {
  const auto model = influx_model(0.01, 0.05);
  const auto prop = smc::parse_property("F[0,10](A >= 8)", model.species);
  const auto space = smc::space_of(model);
  const auto q = smc::init_posterior(smc::grid_design(space, {6}), space, {});

  smc::QueryConfig cfg;
  cfg.pool_size = 60;
  cfg.n_clusters = 20;
  cfg.batch_size = 10;
  cfg.strategy = smc::QueryStrategy::Random;
  cfg.seed = 5;
  const auto r = smc::query_new(q, model, prop, space, cfg, 10, 10.0);
  ASSERT_EQ(r.data.size(), 100);
  EXPECT_EQ(r.data.labels.sum(), 0);

  // agrees with naive simulation at those points
  const auto direct = smc::simulate_batch(
      model,
      [&] {
        std::vector<Eigen::VectorXd> pts;
        for (Eigen::Index i = 0; i < r.selected.rows(); ++i)
          pts.push_back(r.selected.row(i).transpose());
        return pts;
      }(),
      10, 10.0, 123);
  for (const auto& per_point : direct)
    for (const auto& traj : per_point) EXPECT_EQ(smc::check(traj, prop), 0);
}

TEST(QueryNew, ValidatesConfig) {
  const auto model = influx_model();
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto space = smc::space_of(model);
  const auto q = smc::init_posterior(smc::grid_design(space, {4}), space, {});
  smc::QueryConfig cfg;
  cfg.pool_size = 10;
  cfg.n_clusters = 20;  // clusters > pool
  cfg.batch_size = 5;
  EXPECT_THROW(smc::query_new(q, model, prop, space, cfg, 1, 10.0),
               smc::ConfigError);
}

// On a 1-D step-like satisfaction function the informed strategies place
// more queries inside the transition band than random sampling does.
TEST(QueryStrategies, ConcentrateOnTransitionBand) {
  const auto model = influx_model();  // P(k) = P(Poisson(10 k) >= 5)
  const auto prop = smc::parse_property("F[0,10](A >= 5)", model.species);
  const auto space = smc::space_of(model);
  const smc::KernelParams kp{0.3, 1e-6};
  const double band_lo = 0.20, band_hi = 0.93;  // P in roughly [0.05, 0.95]

  std::vector<int> in_band[3];
  for (std::uint64_t seed = 1; seed <= 11; ++seed) {
    const auto design = smc::grid_design(space, {15});
    const auto data = smc::generate_initial_data(model, prop, space, design, 8,
                                                 10.0, smc::mix64(seed), 1);
    const auto fitted = smc::fit(smc::init_posterior(design, space, kp), data, {});
    int si = 0;
    for (auto strat : {smc::QueryStrategy::Variance, smc::QueryStrategy::Gradient,
                       smc::QueryStrategy::Random}) {
      smc::QueryConfig cfg;
      cfg.pool_size = 300;
      cfg.n_clusters = 45;
      cfg.batch_size = 15;
      cfg.strategy = strat;
      cfg.seed = smc::mix64(seed ^ 0xABCDULL);
      const auto r =
          smc::query_new(fitted.posterior, model, prop, space, cfg, 1, 10.0);
      int count = 0;
      for (Eigen::Index i = 0; i < r.selected.rows(); ++i)
        if (r.selected(i, 0) >= band_lo && r.selected(i, 0) <= band_hi) ++count;
      in_band[si++].push_back(count);
    }
  }
  auto median = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const int var_med = median(in_band[0]);
  const int grad_med = median(in_band[1]);
  const int rand_med = median(in_band[2]);
  EXPECT_GT(var_med, rand_med);
  EXPECT_GT(grad_med, rand_med);
}

}  // namespace
