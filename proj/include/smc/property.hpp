#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "smc/errors.hpp"
#include "smc/ssa.hpp"

namespace smc {

enum class CmpOp { Lt, Le, Eq, Ge, Gt };

/// Bounded temporal formula over species counts. Temporal windows are
/// absolute and closed; G/F may not nest inside another temporal operator
/// (time-shifted semantics are out of the supported fragment).
struct PropertyAst {
  enum class Kind { Atom, Not, And, Or, Globally, Eventually };

  Kind kind = Kind::Atom;
  // Atom
  int species = -1;
  std::string species_name;
  CmpOp op = CmpOp::Eq;
  long long threshold = 0;
  // Globally / Eventually window
  double t0 = 0, t1 = 0;
  std::vector<PropertyAst> children;

  bool has_temporal() const {
    if (kind == Kind::Globally || kind == Kind::Eventually) return true;
    for (const auto& c : children)
      if (c.has_temporal()) return true;
    return false;
  }

  double max_time_bound() const {
    double b = 0;
    if (kind == Kind::Globally || kind == Kind::Eventually) b = t1;
    for (const auto& c : children) b = std::max(b, c.max_time_bound());
    return b;
  }
};

namespace detail {

class PropertyParser {
 public:
  PropertyParser(const std::string& text, const std::vector<std::string>& species)
      : text_(text), species_(species) {}

  PropertyAst parse() {
    PropertyAst ast = parse_or();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("unexpected trailing input in property", 1, col());
    return ast;
  }

 private:
  PropertyAst parse_or() {
    PropertyAst lhs = parse_and();
    skip_ws();
    while (peek() == '|') {
      ++pos_;
      PropertyAst node;
      node.kind = PropertyAst::Kind::Or;
      node.children.push_back(std::move(lhs));
      node.children.push_back(parse_and());
      lhs = std::move(node);
      skip_ws();
    }
    return lhs;
  }

  PropertyAst parse_and() {
    PropertyAst lhs = parse_unary();
    skip_ws();
    while (peek() == '&') {
      ++pos_;
      PropertyAst node;
      node.kind = PropertyAst::Kind::And;
      node.children.push_back(std::move(lhs));
      node.children.push_back(parse_unary());
      lhs = std::move(node);
      skip_ws();
    }
    return lhs;
  }

  PropertyAst parse_unary() {
    skip_ws();
    const char c = peek();
    if (c == '!') {
      ++pos_;
      PropertyAst node;
      node.kind = PropertyAst::Kind::Not;
      node.children.push_back(parse_unary());
      return node;
    }
    if ((c == 'G' || c == 'F') && peek_at(pos_ + 1) == '[')
      return parse_temporal(c == 'G' ? PropertyAst::Kind::Globally
                                     : PropertyAst::Kind::Eventually);
    if (c == '(') {
      ++pos_;
      PropertyAst node = parse_or();
      expect(')');
      return node;
    }
    return parse_atom();
  }

  PropertyAst parse_temporal(PropertyAst::Kind kind) {
    const int start_col = col();
    ++pos_;  // G or F
    expect('[');
    double a = parse_number();
    expect(',');
    double b = parse_number();
    expect(']');
    if (a < 0 || !(a < b))
      throw ParseError("inverted or empty time interval", 1, start_col);
    expect('(');
    PropertyAst child = parse_or();
    expect(')');
    if (child.has_temporal())
      throw ParseError("nested temporal operators are not supported", 1,
                       start_col);
    PropertyAst node;
    node.kind = kind;
    node.t0 = a;
    node.t1 = b;
    node.children.push_back(std::move(child));
    return node;
  }

  PropertyAst parse_atom() {
    skip_ws();
    const int start_col = col();
    std::string name = parse_ident();
    if (name.empty())
      throw ParseError("expected species comparison", 1, start_col);
    PropertyAst node;
    node.kind = PropertyAst::Kind::Atom;
    node.species_name = name;
    node.species = -1;
    for (std::size_t i = 0; i < species_.size(); ++i)
      if (species_[i] == name) node.species = static_cast<int>(i);
    if (node.species < 0)
      throw ParseError("unknown species '" + name + "'", 1, start_col);
    skip_ws();
    node.op = parse_cmp();
    skip_ws();
    node.threshold = parse_int();
    return node;
  }

  CmpOp parse_cmp() {
    const char c = peek();
    const char d = peek_at(pos_ + 1);
    if (c == '<' && d == '=') { pos_ += 2; return CmpOp::Le; }
    if (c == '>' && d == '=') { pos_ += 2; return CmpOp::Ge; }
    if (c == '=' && d == '=') { pos_ += 2; return CmpOp::Eq; }
    if (c == '<') { ++pos_; return CmpOp::Lt; }
    if (c == '>') { ++pos_; return CmpOp::Gt; }
    throw ParseError("expected comparison operator (< <= == >= >)", 1, col());
  }

  std::string parse_ident() {
    std::size_t start = pos_;
    if (pos_ < text_.size() &&
        (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    return text_.substr(start, pos_ - start);
  }

  double parse_number() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E' ||
            text_[pos_] == '+' || text_[pos_] == '-'))
      ++pos_;
    try {
      std::size_t used = 0;
      double v = std::stod(text_.substr(start, pos_ - start), &used);
      if (used != pos_ - start) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ParseError("expected a number", 1, static_cast<int>(start) + 1);
    }
  }

  long long parse_int() {
    skip_ws();
    std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ == start || (pos_ == start + 1 && text_[start] == '-'))
      throw ParseError("expected an integer threshold", 1,
                       static_cast<int>(start) + 1);
    return std::stoll(text_.substr(start, pos_ - start));
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c)
      throw ParseError(std::string("expected '") + c + "'", 1, col());
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }
  char peek() const { return peek_at(pos_); }
  char peek_at(std::size_t i) const { return i < text_.size() ? text_[i] : '\0'; }
  int col() const { return static_cast<int>(pos_) + 1; }

  const std::string& text_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& species_;
};

inline bool compare(long long value, CmpOp op, long long threshold) {
  switch (op) {
    case CmpOp::Lt: return value < threshold;
    case CmpOp::Le: return value <= threshold;
    case CmpOp::Eq: return value == threshold;
    case CmpOp::Ge: return value >= threshold;
    case CmpOp::Gt: return value > threshold;
  }
  return false;
}

/// Evaluates a temporal-free subformula on a single state.
inline bool eval_static(const PropertyAst& p, const State& state) {
  switch (p.kind) {
    case PropertyAst::Kind::Atom:
      return compare(state[p.species], p.op, p.threshold);
    case PropertyAst::Kind::Not:
      return !eval_static(p.children[0], state);
    case PropertyAst::Kind::And:
      return eval_static(p.children[0], state) && eval_static(p.children[1], state);
    case PropertyAst::Kind::Or:
      return eval_static(p.children[0], state) || eval_static(p.children[1], state);
    default:
      throw std::logic_error("temporal node in static context");
  }
}

inline bool eval_top(const Trajectory& traj, const PropertyAst& p) {
  switch (p.kind) {
    case PropertyAst::Kind::Atom:
      return eval_static(p, traj.states.front());
    case PropertyAst::Kind::Not:
      return !eval_top(traj, p.children[0]);
    case PropertyAst::Kind::And:
      return eval_top(traj, p.children[0]) && eval_top(traj, p.children[1]);
    case PropertyAst::Kind::Or:
      return eval_top(traj, p.children[0]) || eval_top(traj, p.children[1]);
    case PropertyAst::Kind::Globally:
    case PropertyAst::Kind::Eventually: {
      const bool globally = p.kind == PropertyAst::Kind::Globally;
      // Segment i covers [times[i], times[i+1]); it meets the closed window
      // [t0, t1] iff times[i] <= t1 and times[i+1] > t0.
      std::size_t i =
          std::upper_bound(traj.times.begin(), traj.times.end(), p.t0) -
          traj.times.begin() - 1;
      for (; i < traj.times.size() && traj.times[i] <= p.t1; ++i) {
        const bool v = eval_static(p.children[0], traj.states[i]);
        if (globally && !v) return false;
        if (!globally && v) return true;
      }
      return globally;
    }
  }
  return false;
}

}  // namespace detail

/// Grammar: atoms `<species> <op> <int>`, temporal `G[a,b](phi)` and
/// `F[a,b](phi)`, connectives `&`, `|`, `!`, parentheses. `!` binds
/// tightest, then `&`, then `|`.
inline PropertyAst parse_property(const std::string& text,
                                  const std::vector<std::string>& species) {
  return detail::PropertyParser(text, species).parse();
}

/// Boolean check of one trajectory: 1 if the property holds, else 0.
/// Throws RuntimeFailure when a window extends past the horizon.
inline int check(const Trajectory& traj, const PropertyAst& prop) {
  if (prop.max_time_bound() > traj.t_end)
    throw RuntimeFailure("property window exceeds trajectory horizon");
  return detail::eval_top(traj, prop) ? 1 : 0;
}

inline std::vector<int> label_batch(const std::vector<Trajectory>& trajs,
                                    const PropertyAst& prop) {
  std::vector<int> labels(trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) labels[i] = check(trajs[i], prop);
  return labels;
}

}  // namespace smc
