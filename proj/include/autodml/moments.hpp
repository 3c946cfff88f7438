#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autodml/errors.hpp"

namespace autodml {

enum class TargetKind { Late, Characteristics, CounterfactualCdf };

inline std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::Late: return "late";
    case TargetKind::Characteristics: return "chars";
    case TargetKind::CounterfactualCdf: return "cdf";
  }
  return "?";
}

// Which complier parameter is estimated. For Characteristics, f(x) selects
// covariate coordinates (0-based). For CounterfactualCdf, each grid point y
// carries its own exactly-identified 2-parameter system (beta^y, delta^y);
// parameters are laid out as [beta over the grid, then delta over the grid].
struct TargetSpec {
  TargetKind kind = TargetKind::Late;
  std::vector<int> characteristic_columns;
  std::vector<double> grid;

  void validate(Eigen::Index covariate_width) const {
    switch (kind) {
      case TargetKind::Late:
        break;
      case TargetKind::Characteristics:
        if (characteristic_columns.empty())
          throw ConfigError("characteristics target needs at least one covariate column");
        for (int c : characteristic_columns)
          if (c < 0 || c >= covariate_width)
            throw ConfigError("characteristic column " + std::to_string(c) + " out of range");
        break;
      case TargetKind::CounterfactualCdf:
        if (grid.empty()) throw ConfigError("cdf target needs a nonempty grid");
        for (std::size_t i = 1; i < grid.size(); ++i)
          if (!(grid[i] > grid[i - 1]))
            throw ConfigError("cdf grid must be strictly ascending");
        break;
    }
  }

  Eigen::Index blocks() const {
    return kind == TargetKind::CounterfactualCdf ? static_cast<Eigen::Index>(grid.size()) : 1;
  }

  Eigen::Index v_width() const {
    switch (kind) {
      case TargetKind::Late: return 2;
      case TargetKind::Characteristics:
        return static_cast<Eigen::Index>(characteristic_columns.size()) + 1;
      case TargetKind::CounterfactualCdf: return 3;
    }
    return 0;
  }

  Eigen::Index block_param_width() const {
    switch (kind) {
      case TargetKind::Late: return 1;
      case TargetKind::Characteristics:
        return static_cast<Eigen::Index>(characteristic_columns.size());
      case TargetKind::CounterfactualCdf: return 2;
    }
    return 0;
  }

  Eigen::Index total_params() const { return blocks() * block_param_width(); }

  // Index of block b's parameter j within the stacked theta vector.
  Eigen::Index param_index(Eigen::Index block, Eigen::Index j) const {
    if (kind == TargetKind::CounterfactualCdf) return j * blocks() + block;
    return j;
  }

  std::vector<std::string> parameter_labels() const {
    std::vector<std::string> out;
    switch (kind) {
      case TargetKind::Late:
        out.push_back("late");
        break;
      case TargetKind::Characteristics:
        for (int c : characteristic_columns) out.push_back("x" + std::to_string(c + 1));
        break;
      case TargetKind::CounterfactualCdf:
        for (double y : grid) out.push_back("beta@" + std::to_string(y));
        for (double y : grid) out.push_back("delta@" + std::to_string(y));
        break;
    }
    return out;
  }
};

// Observation-level moment vector V for one block.
//   LATE:            V = (y, d)
//   Characteristics: V = (d f(x), d)
//   CDF at y0:       V = ((d-1) 1{y<=y0}, d 1{y<=y0}, d)
inline Eigen::VectorXd build_v(const TargetSpec& target, Eigen::Index block, double y, int d,
                               const Eigen::VectorXd& x) {
  Eigen::VectorXd v(target.v_width());
  switch (target.kind) {
    case TargetKind::Late:
      v << y, static_cast<double>(d);
      break;
    case TargetKind::Characteristics: {
      const auto f = static_cast<Eigen::Index>(target.characteristic_columns.size());
      for (Eigen::Index j = 0; j < f; ++j)
        v[j] = d * x[target.characteristic_columns[static_cast<std::size_t>(j)]];
      v[f] = static_cast<double>(d);
      break;
    }
    case TargetKind::CounterfactualCdf: {
      const double ind = y <= target.grid[static_cast<std::size_t>(block)] ? 1.0 : 0.0;
      v << (d - 1.0) * ind, d * ind, static_cast<double>(d);
      break;
    }
  }
  return v;
}

// A(theta) for one block; theta enters only the last column, so the moment is
// affine in theta.
//   LATE:            [1  -theta]
//   Characteristics: [I  -theta]
//   CDF:             [1 0 -beta; 0 1 -delta]
inline Eigen::MatrixXd a_matrix(const TargetSpec& target, const Eigen::VectorXd& theta_block) {
  const Eigen::Index pw = target.block_param_width();
  if (theta_block.size() != pw)
    throw std::invalid_argument("a_matrix: parameter width mismatch");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(pw, target.v_width());
  a.leftCols(pw).setIdentity();
  a.rightCols(1) = -theta_block;
  return a;
}

// eta = gamma(1,x) - gamma(0,x) + alpha(z,x) [v - gamma(z,x)]; the de-biased
// moment is psi(theta) = A(theta) eta.
inline Eigen::VectorXd debiased_eta(const Eigen::VectorXd& v, const Eigen::VectorXd& gamma1,
                                    const Eigen::VectorXd& gamma0, const Eigen::VectorXd& gammaz,
                                    double alpha) {
  return gamma1 - gamma0 + alpha * (v - gammaz);
}

inline Eigen::VectorXd psi(const TargetSpec& target, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& gamma1, const Eigen::VectorXd& gamma0,
                           const Eigen::VectorXd& gammaz, double alpha,
                           const Eigen::VectorXd& theta_block) {
  if (v.size() != target.v_width() || gamma1.size() != v.size() || gamma0.size() != v.size() ||
      gammaz.size() != v.size())
    throw std::invalid_argument("psi: width mismatch");
  return a_matrix(target, theta_block) * debiased_eta(v, gamma1, gamma0, gammaz, alpha);
}

constexpr double kWeakFirstStageTol = 1e-10;

// Exactly-identified solve from the averaged eta of one block. The last eta
// coordinate is the mean treatment contrast; every parameter is a ratio
// against it.
inline Eigen::VectorXd solve_theta(const TargetSpec& target, const Eigen::VectorXd& eta_mean) {
  if (eta_mean.size() != target.v_width())
    throw std::invalid_argument("solve_theta: width mismatch");
  const double denom = eta_mean[eta_mean.size() - 1];
  if (std::abs(denom) < kWeakFirstStageTol)
    throw WeakFirstStageError("no complier mass detected: mean treatment contrast is " +
                              std::to_string(denom));
  return eta_mean.head(eta_mean.size() - 1) / denom;
}

// Distinct regressions gamma needs for a target. The treatment component is
// shared across CDF blocks, so it is fit once.
inline Eigen::Index component_count(const TargetSpec& target) {
  switch (target.kind) {
    case TargetKind::Late: return 2;
    case TargetKind::Characteristics:
      return static_cast<Eigen::Index>(target.characteristic_columns.size()) + 1;
    case TargetKind::CounterfactualCdf:
      return 2 * static_cast<Eigen::Index>(target.grid.size()) + 1;
  }
  return 0;
}

inline double component_value(const TargetSpec& target, Eigen::Index component, double y, int d,
                              const Eigen::VectorXd& x) {
  switch (target.kind) {
    case TargetKind::Late:
      return component == 0 ? y : static_cast<double>(d);
    case TargetKind::Characteristics: {
      const auto f = static_cast<Eigen::Index>(target.characteristic_columns.size());
      if (component < f)
        return d * x[target.characteristic_columns[static_cast<std::size_t>(component)]];
      return static_cast<double>(d);
    }
    case TargetKind::CounterfactualCdf: {
      const auto g = static_cast<Eigen::Index>(target.grid.size());
      if (component == 2 * g) return static_cast<double>(d);
      const Eigen::Index block = component / 2;
      const double ind = y <= target.grid[static_cast<std::size_t>(block)] ? 1.0 : 0.0;
      return component % 2 == 0 ? (d - 1.0) * ind : d * ind;
    }
  }
  return 0.0;
}

inline std::vector<Eigen::Index> block_component_indices(const TargetSpec& target,
                                                         Eigen::Index block) {
  switch (target.kind) {
    case TargetKind::Late:
      return {0, 1};
    case TargetKind::Characteristics: {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index c = 0; c < component_count(target); ++c) idx.push_back(c);
      return idx;
    }
    case TargetKind::CounterfactualCdf:
      return {2 * block, 2 * block + 1,
              2 * static_cast<Eigen::Index>(target.grid.size())};
  }
  return {};
}

// Pool-adjacent-violators: least-squares nondecreasing fit, used for the
// optional monotone rearrangement of CDF estimates.
inline std::vector<double> isotonic_fit(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<double> level(n), weight(n);
  std::vector<std::size_t> size(n);
  std::size_t blocks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    level[blocks] = values[i];
    weight[blocks] = 1.0;
    size[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
      const double w = weight[blocks - 2] + weight[blocks - 1];
      level[blocks - 2] =
          (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / w;
      weight[blocks - 2] = w;
      size[blocks - 2] += size[blocks - 1];
      --blocks;
    }
  }
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t b = 0; b < blocks; ++b)
    out.insert(out.end(), size[b], level[b]);
  return out;
}

}  // namespace autodml
