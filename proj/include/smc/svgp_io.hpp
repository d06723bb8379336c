#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "smc/errors.hpp"
#include "smc/svgp.hpp"

namespace smc {

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

}  // namespace detail

/// Self-describing posterior snapshot. Inducing coordinates are stored in
/// normalized units next to the parameter ranges that define the map, so a
/// reloaded posterior predicts bit-identically.
inline nlohmann::json posterior_to_json(const VariationalPosterior& q) {
  nlohmann::json j;
  j["format"] = "smc-posterior";
  j["version"] = 1;
  j["link"] = "probit";
  j["kernel"] = {{"length_scale", q.kernel().length_scale},
                 {"jitter", q.kernel().jitter}};
  nlohmann::json space = nlohmann::json::array();
  for (const auto& r : q.space().ranges)
    space.push_back({{"name", r.name}, {"lo", r.lo}, {"hi", r.hi}});
  j["space"] = std::move(space);
  j["inducing_normalized"] = detail::matrix_to_json(q.inducing_normalized());
  nlohmann::json mu = nlohmann::json::array();
  for (Eigen::Index i = 0; i < q.mu().size(); ++i) mu.push_back(q.mu()[i]);
  j["mu"] = std::move(mu);
  j["sigma_sqrt"] = detail::matrix_to_json(q.sigma_sqrt());
  return j;
}

inline VariationalPosterior posterior_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "smc-posterior")
    throw ParseError("not a posterior file");
  if (j.value("link", "") != "probit")
    throw ParseError("unsupported link '" + j.value("link", "") + "'");
  KernelParams kernel;
  kernel.length_scale = j.at("kernel").at("length_scale").get<double>();
  kernel.jitter = j.at("kernel").at("jitter").get<double>();
  ParameterSpace space;
  for (const auto& r : j.at("space"))
    space.ranges.push_back({r.at("name").get<std::string>(),
                            r.at("lo").get<double>(), r.at("hi").get<double>()});
  const Eigen::MatrixXd z = detail::matrix_from_json(j.at("inducing_normalized"));
  const auto& mu_json = j.at("mu");
  Eigen::VectorXd mu(static_cast<Eigen::Index>(mu_json.size()));
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu[i] = mu_json[i].get<double>();
  const Eigen::MatrixXd L = detail::matrix_from_json(j.at("sigma_sqrt"));
  return VariationalPosterior::from_parts(z, space, kernel, mu, L);
}

inline void save_posterior(const VariationalPosterior& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write posterior file '" + path + "'");
  out << posterior_to_json(q).dump(2) << '\n';
}

inline VariationalPosterior load_posterior(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open posterior file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad posterior file: ") + e.what());
  }
  return posterior_from_json(j);
}

}  // namespace smc
