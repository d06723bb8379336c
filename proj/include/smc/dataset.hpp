#pragma once

#include <Eigen/Core>

#include "smc/errors.hpp"

namespace smc {

/// Labeled observations (x_i, y_i): rows of `points` are parameter points in
/// natural units, labels are the {0,1} model-checking outcomes. Repeated
/// points are expected (several trajectories per parameter value).
struct Dataset {
  Eigen::MatrixXd points;  // n x d
  Eigen::VectorXi labels;  // n, each 0 or 1

  Eigen::Index size() const { return labels.size(); }

  void append(const Eigen::VectorXd& x, int y) {
    if (y != 0 && y != 1) throw ConfigError("labels must be 0 or 1");
    if (points.rows() == 0) points.resize(0, x.size());
    if (points.cols() != x.size()) throw ConfigError("point dimension mismatch");
    points.conservativeResize(points.rows() + 1, Eigen::NoChange);
    points.row(points.rows() - 1) = x.transpose();
    labels.conservativeResize(labels.size() + 1);
    labels[labels.size() - 1] = y;
  }

  void append(const Dataset& other) {
    if (other.size() == 0) return;
    if (size() == 0) {
      *this = other;
      return;
    }
    if (points.cols() != other.points.cols())
      throw ConfigError("point dimension mismatch");
    const Eigen::Index n = points.rows();
    points.conservativeResize(n + other.points.rows(), Eigen::NoChange);
    points.bottomRows(other.points.rows()) = other.points;
    labels.conservativeResize(n + other.labels.size());
    labels.tail(other.labels.size()) = other.labels;
  }
};

}  // namespace smc
