#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "smc/errors.hpp"
#include "smc/experiment.hpp"
#include "smc/text.hpp"

namespace smc {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// "20x20" -> {20, 20}
inline std::vector<int> parse_grid_spec(const std::string& s) {
  std::vector<int> dims;
  for (const auto& part : split(trim(s), 'x')) {
    char* end = nullptr;
    const long v = std::strtol(part.c_str(), &end, 10);
    if (part.empty() || *end != '\0' || v < 1)
      throw ConfigError("bad grid spec '" + s + "'");
    dims.push_back(static_cast<int>(v));
  }
  if (dims.empty()) throw ConfigError("bad grid spec '" + s + "'");
  return dims;
}

namespace detail {

inline double to_double(const std::string& v, const std::string& key, int line) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0')
    throw ConfigError("line " + std::to_string(line) + ": bad number for '" +
                      key + "'");
  return x;
}

inline long to_long(const std::string& v, const std::string& key, int line) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0')
    throw ConfigError("line " + std::to_string(line) + ": bad integer for '" +
                      key + "'");
  return x;
}

inline bool to_bool(const std::string& v, const std::string& key, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("line " + std::to_string(line) + ": bad boolean for '" +
                    key + "'");
}

}  // namespace detail

/// Line-based `key = value` config with [sections] mirroring
/// ExperimentConfig. Unknown keys are rejected so typos surface early.
inline ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto bad_key = [&]() -> ConfigError {
      return ConfigError("line " + std::to_string(lineno) + ": unknown key '" +
                         key + "' in section [" + section + "]");
    };

    if (section.empty()) {
      if (key == "model") cfg.model_path = value;
      else if (key == "property") cfg.property_text = value;
      else if (key == "property_file") cfg.property_path = value;
      else if (key == "t_end") cfg.t_end = detail::to_double(value, key, lineno);
      else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(detail::to_long(value, key, lineno));
      else if (key == "threads")
        cfg.threads = static_cast<int>(detail::to_long(value, key, lineno));
      else throw bad_key();
    } else if (section == "design") {
      if (key == "type") {
        if (value == "grid") cfg.design.type = DesignType::Grid;
        else if (value == "uniform") cfg.design.type = DesignType::Uniform;
        else if (value == "lhs") cfg.design.type = DesignType::Lhs;
        else throw ConfigError("line " + std::to_string(lineno) +
                               ": unknown design type '" + value + "'");
      } else if (key == "grid") cfg.design.grid_dims = parse_grid_spec(value);
      else if (key == "n")
        cfg.design.n = static_cast<int>(detail::to_long(value, key, lineno));
      else if (key == "n_traj")
        cfg.n_traj = static_cast<int>(detail::to_long(value, key, lineno));
      else throw bad_key();
    } else if (section == "inducing") {
      if (key == "type") {
        if (value == "from-design") cfg.inducing.type = InducingType::FromDesign;
        else if (value == "grid") cfg.inducing.type = InducingType::Grid;
        else if (value == "kmeanspp") cfg.inducing.type = InducingType::KmeansPP;
        else throw ConfigError("line " + std::to_string(lineno) +
                               ": unknown inducing type '" + value + "'");
      } else if (key == "grid") cfg.inducing.grid_dims = parse_grid_spec(value);
      else if (key == "k")
        cfg.inducing.k = static_cast<int>(detail::to_long(value, key, lineno));
      else throw bad_key();
    } else if (section == "fit") {
      if (key == "max_iterations")
        cfg.fit_options.max_iterations =
            static_cast<int>(detail::to_long(value, key, lineno));
      else if (key == "tolerance")
        cfg.fit_options.tolerance = detail::to_double(value, key, lineno);
      else if (key == "initial_step")
        cfg.fit_options.initial_step = detail::to_double(value, key, lineno);
      else if (key == "quad_nodes")
        cfg.fit_options.quad_nodes =
            static_cast<int>(detail::to_long(value, key, lineno));
      else if (key == "patience")
        cfg.fit_options.patience =
            static_cast<int>(detail::to_long(value, key, lineno));
      else throw bad_key();
    } else if (section == "kernel") {
      if (key == "length_scale")
        cfg.kernel.length_scale = detail::to_double(value, key, lineno);
      else if (key == "jitter")
        cfg.kernel.jitter = detail::to_double(value, key, lineno);
      else throw bad_key();
    } else if (section == "active") {
      if (key == "iterations")
        cfg.active_iterations =
            static_cast<int>(detail::to_long(value, key, lineno));
      else if (key == "pool_size")
        cfg.query.pool_size = static_cast<int>(detail::to_long(value, key, lineno));
      else if (key == "n_clusters")
        cfg.query.n_clusters =
            static_cast<int>(detail::to_long(value, key, lineno));
      else if (key == "batch_size")
        cfg.query.batch_size =
            static_cast<int>(detail::to_long(value, key, lineno));
      else if (key == "strategy")
        cfg.query.strategy = parse_strategy(value);
      else if (key == "reselect_inducing")
        cfg.reselect_inducing = detail::to_bool(value, key, lineno);
      else throw bad_key();
    } else if (section == "baseline") {
      if (key == "grid") cfg.baseline_grid = parse_grid_spec(value);
      else if (key == "runs")
        cfg.baseline_runs = static_cast<int>(detail::to_long(value, key, lineno));
      else throw bad_key();
    } else if (section == "eval") {
      if (key == "grid") cfg.eval_grid = parse_grid_spec(value);
      else throw bad_key();
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" +
                        section + "]");
    }
  }
  if (cfg.t_end <= 0) throw ConfigError("t_end must be positive");
  if (cfg.n_traj < 1) throw ConfigError("n_traj must be >= 1");
  if (cfg.fit_options.max_iterations < 1 || cfg.fit_options.tolerance <= 0 ||
      cfg.fit_options.quad_nodes < 1 || cfg.fit_options.patience < 1 ||
      cfg.fit_options.initial_step <= 0)
    throw ConfigError("fit options must be positive");
  if (cfg.kernel.length_scale <= 0 || cfg.kernel.jitter < 0)
    throw ConfigError("kernel parameters out of range");
  if (cfg.baseline_runs < 1) throw ConfigError("baseline runs must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  return cfg;
}

/// Reads a config file; model/property paths are resolved relative to the
/// config file's directory.
inline ExperimentConfig load_config_file(const std::string& path) {
  ExperimentConfig cfg = parse_experiment_config(read_text_file(path));
  const auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative())
      p = (dir / p).string();
  };
  resolve(cfg.model_path);
  resolve(cfg.property_path);
  return cfg;
}

/// Loads the model and property referenced by a config, filling
/// property_text from property_file when needed.
inline std::pair<CrnModel, PropertyAst> resolve_experiment_inputs(
    ExperimentConfig& cfg) {
  if (cfg.model_path.empty()) throw ConfigError("no model file configured");
  CrnModel model = parse_model(read_text_file(cfg.model_path));
  if (cfg.property_text.empty()) {
    if (cfg.property_path.empty())
      throw ConfigError("no property configured (property or property_file)");
    cfg.property_text = trim(read_text_file(cfg.property_path));
  }
  PropertyAst prop = parse_property(cfg.property_text, model.species);
  return {std::move(model), std::move(prop)};
}

}  // namespace smc
