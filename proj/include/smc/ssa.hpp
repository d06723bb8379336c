#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "smc/crn.hpp"
#include "smc/parallel.hpp"
#include "smc/rng.hpp"

namespace smc {

/// Right-continuous piecewise-constant CTMC path: state is states[i] on
/// [times[i], times[i+1]) and states.back() from the last jump to t_end.
struct Trajectory {
  std::vector<double> times;  // strictly increasing, times[0] == 0
  std::vector<State> states;  // same length as times
  double t_end = 0;

  const State& state_at(double t) const {
    std::size_t lo = 0, hi = times.size();
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (times[mid] <= t)
        lo = mid;
      else
        hi = mid;
    }
    return states[lo];
  }
};

/// Gillespie direct method. Pure function of its arguments: the same
/// (model, point, t_end, rng stream) always yields the same trajectory.
/// An absorbing state (total rate zero) leaves the path constant to t_end.
inline Trajectory simulate(const CrnModel& model, const Eigen::VectorXd& point,
                           double t_end, RngStream rng) {
  Trajectory traj;
  traj.t_end = t_end;
  traj.times.push_back(0.0);
  traj.states.push_back(model.initial_state);

  State state = model.initial_state;
  const std::size_t n_reactions = model.reactions.size();
  std::vector<double> a(n_reactions);
  double t = 0.0;

  for (;;) {
    double total = 0.0;
    for (std::size_t r = 0; r < n_reactions; ++r) {
      const Reaction& reaction = model.reactions[r];
      double prop = point[reaction.rate_param];
      for (std::size_t i = 0; i < state.size() && prop != 0.0; ++i) {
        const int need = reaction.reactants[i];
        if (need == 0) continue;
        if (state[i] < need) {
          prop = 0.0;
          break;
        }
        for (int j = 0; j < need; ++j) prop *= static_cast<double>(state[i] - j);
      }
      a[r] = prop;
      total += prop;
    }
    if (total <= 0.0) break;  // absorbing

    t += rng.exponential(total);
    if (t > t_end) break;

    double u = rng.uniform() * total;
    std::size_t chosen = n_reactions - 1;
    for (std::size_t r = 0; r < n_reactions; ++r) {
      if (u < a[r]) {
        chosen = r;
        break;
      }
      u -= a[r];
    }
    const Reaction& reaction = model.reactions[chosen];
    for (std::size_t i = 0; i < state.size(); ++i) state[i] += reaction.change[i];

    if (t <= traj.times.back())
      t = std::nextafter(traj.times.back(), std::numeric_limits<double>::infinity());
    traj.times.push_back(t);
    traj.states.push_back(state);
  }
  return traj;
}

/// n_traj trajectories at each point. Trajectory (i, j) uses stream
/// i*n_traj + j of base_seed, so output is identical for any thread count
/// or execution order.
inline std::vector<std::vector<Trajectory>> simulate_batch(
    const CrnModel& model, const std::vector<Eigen::VectorXd>& points,
    int n_traj, double t_end, std::uint64_t base_seed, int threads = 1) {
  std::vector<std::vector<Trajectory>> out(points.size());
  for (auto& per_point : out) per_point.resize(n_traj);
  parallel_for(points.size() * static_cast<std::size_t>(n_traj), threads,
               [&](std::size_t flat) {
                 const std::size_t i = flat / n_traj;
                 const std::size_t j = flat % n_traj;
                 out[i][j] = simulate(model, points[i], t_end,
                                      RngStream(base_seed, flat));
               });
  return out;
}

/// CSV dump: header `t,<species...>`, one row per jump.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 const CrnModel& model) {
  os << 't';
  for (const auto& s : model.species) os << ',' << s;
  os << '\n';
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << format_double(traj.times[i]);
    for (int c : traj.states[i]) os << ',' << c;
    os << '\n';
  }
}

}  // namespace smc
