#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "smc/errors.hpp"
#include "smc/text.hpp"

namespace smc {

using State = std::vector<int>;

struct ParamRange {
  std::string name;
  double lo = 0;
  double hi = 0;
};

/// One mass-action reaction. Stoichiometries are stored per species index,
/// so reactants/products/change all have length = number of species.
struct Reaction {
  std::string label;
  std::vector<int> reactants;
  std::vector<int> products;
  std::vector<int> change;  // products - reactants
  int rate_param = -1;
};

/// Parametric chemical reaction network. A fixed parameter point turns the
/// network into a population CTMC over the species counts. Immutable after
/// parsing; safe to share across simulation workers.
struct CrnModel {
  std::vector<std::string> species;
  State initial_state;
  std::vector<ParamRange> params;
  std::vector<Reaction> reactions;

  int species_index(const std::string& name) const {
    for (std::size_t i = 0; i < species.size(); ++i)
      if (species[i] == name) return static_cast<int>(i);
    return -1;
  }
  int param_index(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

inline bool is_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
    return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

inline int find_col(const std::string& line, const std::string& token) {
  auto pos = line.find(token);
  return pos == std::string::npos ? 1 : static_cast<int>(pos) + 1;
}

// Parses a reaction side "A + B + B" or "0" into per-species stoichiometry.
inline std::vector<int> parse_side(const std::string& text, const CrnModel& model,
                                   int lineno, const std::string& line) {
  std::vector<int> stoich(model.species.size(), 0);
  std::string t = trim(text);
  if (t == "0") return stoich;
  if (t.empty())
    throw ParseError("empty reaction side (write '0' for no species)", lineno, 1);
  for (const auto& part : split(t, '+')) {
    std::string name = trim(part);
    if (!is_ident(name))
      throw ParseError("bad species term '" + name + "'", lineno,
                       find_col(line, name));
    int idx = model.species_index(name);
    if (idx < 0)
      throw ParseError("undeclared species '" + name + "'", lineno,
                       find_col(line, name));
    ++stoich[idx];
  }
  return stoich;
}

}  // namespace detail

/// Parses the line-based model format:
///
///   # comment
///   species S=95 I=5 R=0
///   param k_I range 0.005 0.3
///   reaction infect: S + I -> I + I @ k_I
///
/// An empty reaction side is written `0`. Throws ParseError with the
/// offending line/column.
inline CrnModel parse_model(const std::string& text) {
  CrnModel model;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    auto tokens = split_ws(line);
    const std::string& kind = tokens[0];

    if (kind == "species") {
      if (tokens.size() < 2)
        throw ParseError("species line needs at least one Name=count entry",
                         lineno, 1);
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        auto eq = tokens[i].find('=');
        if (eq == std::string::npos)
          throw ParseError("expected Name=count, got '" + tokens[i] + "'",
                           lineno, detail::find_col(raw, tokens[i]));
        std::string name = tokens[i].substr(0, eq);
        std::string count_str = tokens[i].substr(eq + 1);
        if (!detail::is_ident(name))
          throw ParseError("bad species name '" + name + "'", lineno,
                           detail::find_col(raw, tokens[i]));
        if (model.species_index(name) >= 0)
          throw ParseError("duplicate species name '" + name + "'", lineno,
                           detail::find_col(raw, tokens[i]));
        char* end = nullptr;
        long count = std::strtol(count_str.c_str(), &end, 10);
        if (count_str.empty() || *end != '\0')
          throw ParseError("bad initial count '" + count_str + "'", lineno,
                           detail::find_col(raw, tokens[i]));
        if (count < 0)
          throw ParseError("negative initial count for '" + name + "'", lineno,
                           detail::find_col(raw, tokens[i]));
        model.species.push_back(name);
        model.initial_state.push_back(static_cast<int>(count));
      }
    } else if (kind == "param") {
      if (tokens.size() != 5 || tokens[2] != "range")
        throw ParseError("expected: param <name> range <lo> <hi>", lineno, 1);
      const std::string& name = tokens[1];
      if (!detail::is_ident(name))
        throw ParseError("bad parameter name '" + name + "'", lineno,
                         detail::find_col(raw, name));
      if (model.param_index(name) >= 0)
        throw ParseError("duplicate parameter name '" + name + "'", lineno,
                         detail::find_col(raw, name));
      char* e1 = nullptr;
      char* e2 = nullptr;
      double lo = std::strtod(tokens[3].c_str(), &e1);
      double hi = std::strtod(tokens[4].c_str(), &e2);
      if (*e1 != '\0' || *e2 != '\0')
        throw ParseError("bad range bounds", lineno, detail::find_col(raw, tokens[3]));
      if (!(lo < hi))
        throw ParseError("empty parameter range for '" + name +
                             "' (need lo < hi)",
                         lineno, detail::find_col(raw, tokens[3]));
      model.params.push_back({name, lo, hi});
    } else if (kind == "reaction") {
      auto colon = line.find(':');
      if (colon == std::string::npos)
        throw ParseError("expected: reaction <label>: <lhs> -> <rhs> @ <param>",
                         lineno, 1);
      std::string label = trim(line.substr(8, colon - 8));
      if (!detail::is_ident(label))
        throw ParseError("bad reaction label '" + label + "'", lineno,
                         detail::find_col(raw, label.empty() ? ":" : label));
      for (const auto& r : model.reactions)
        if (r.label == label)
          throw ParseError("duplicate reaction label '" + label + "'", lineno,
                           detail::find_col(raw, label));
      std::string rest = line.substr(colon + 1);
      auto arrow = rest.find("->");
      if (arrow == std::string::npos)
        throw ParseError("missing '->' in reaction", lineno, 1);
      auto at = rest.find('@');
      if (at == std::string::npos || at < arrow)
        throw ParseError("missing '@ <param>' in reaction", lineno, 1);
      Reaction reaction;
      reaction.label = label;
      reaction.reactants =
          detail::parse_side(rest.substr(0, arrow), model, lineno, raw);
      reaction.products = detail::parse_side(
          rest.substr(arrow + 2, at - arrow - 2), model, lineno, raw);
      std::string pname = trim(rest.substr(at + 1));
      if (!detail::is_ident(pname))
        throw ParseError("bad rate parameter '" + pname + "'", lineno,
                         detail::find_col(raw, pname.empty() ? "@" : pname));
      reaction.rate_param = model.param_index(pname);
      if (reaction.rate_param < 0)
        throw ParseError("undeclared parameter '" + pname + "'", lineno,
                         detail::find_col(raw, pname));
      reaction.change.resize(model.species.size());
      for (std::size_t i = 0; i < model.species.size(); ++i)
        reaction.change[i] = reaction.products[i] - reaction.reactants[i];
      model.reactions.push_back(std::move(reaction));
    } else {
      throw ParseError("unknown directive '" + kind + "'", lineno,
                       detail::find_col(raw, kind));
    }
  }
  if (model.species.empty())
    throw ParseError("model declares no species", lineno, 1);
  return model;
}

/// Canonical text form; parse_model(serialize_model(m)) reproduces m.
inline std::string serialize_model(const CrnModel& model) {
  std::ostringstream out;
  out << "species";
  for (std::size_t i = 0; i < model.species.size(); ++i)
    out << ' ' << model.species[i] << '=' << model.initial_state[i];
  out << '\n';
  for (const auto& p : model.params)
    out << "param " << p.name << " range " << format_double(p.lo) << ' '
        << format_double(p.hi) << '\n';
  auto side = [&](const std::vector<int>& stoich) {
    std::string s;
    for (std::size_t i = 0; i < stoich.size(); ++i)
      for (int c = 0; c < stoich[i]; ++c) {
        if (!s.empty()) s += " + ";
        s += model.species[i];
      }
    return s.empty() ? std::string("0") : s;
  };
  for (const auto& r : model.reactions)
    out << "reaction " << r.label << ": " << side(r.reactants) << " -> "
        << side(r.products) << " @ " << model.params[r.rate_param].name << '\n';
  return out.str();
}

/// Mass-action propensities with falling-factorial combinatorics: a reaction
/// with rate k and reactant stoichiometry {A:a, ...} fires at rate
/// k * n_A (n_A-1) ... (n_A-a+1) * ...; zero whenever a reactant count is
/// insufficient. Linear in the rate parameter by construction.
inline Eigen::VectorXd propensities(const CrnModel& model, const State& state,
                                    const Eigen::VectorXd& point) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(model.reactions.size()));
  for (std::size_t r = 0; r < model.reactions.size(); ++r) {
    const Reaction& reaction = model.reactions[r];
    double a = point[reaction.rate_param];
    for (std::size_t i = 0; i < state.size() && a != 0.0; ++i) {
      const int need = reaction.reactants[i];
      if (need == 0) continue;
      if (state[i] < need) {
        a = 0.0;
        break;
      }
      for (int j = 0; j < need; ++j) a *= static_cast<double>(state[i] - j);
    }
    out[static_cast<Eigen::Index>(r)] = a;
  }
  return out;
}

/// Applies the reaction's state change. Throws if a reactant count is
/// insufficient; that indicates a simulator bug, not a user error.
inline State apply_reaction(const State& state, const Reaction& reaction) {
  State next = state;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] < reaction.reactants[i])
      throw std::logic_error("apply_reaction: state underflow applying '" +
                             reaction.label + "'");
    next[i] += reaction.change[i];
  }
  return next;
}

}  // namespace smc
