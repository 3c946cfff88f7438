#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "autodml/baselines.hpp"
#include "autodml/crossfit.hpp"
#include "autodml/dataset.hpp"
#include "autodml/errors.hpp"
#include "autodml/inference.hpp"
#include "autodml/numeric.hpp"
#include "autodml/rng.hpp"

namespace autodml {

// Built-in benchmark design: a step propensity with near-violated overlap, a
// quadratic outcome mean, and a linear-in-x compliance rate.
//   X ~ U[0,1],  Z|X ~ Bern(pi0(x)),  D|Z,X ~ Bern(z x),  Y|Z,X ~ N(2 z x^2, 1)
struct SimDesign {
  int n = 1000;

  static double propensity(double x) { return x <= 0.5 ? 0.05 : 0.95; }
  static double treatment_prob(int z, double x) { return z * x; }
  static double outcome_mean(int z, double x) { return 2.0 * z * x * x; }
};

inline DictionarySpec benchmark_dictionary() {
  DictionarySpec spec;
  spec.degree = 4;
  spec.interactions = false;
  spec.layout = DictionaryLayout::MainInteraction;
  spec.standardize = true;
  spec.covariate_width = 1;
  return spec;  // p = 10
}

inline std::vector<double> default_beta_grid() { return {-3, -2, -1, 0, 1, 2, 3, 4}; }
inline std::vector<double> default_delta_grid() { return {-2, -1, 0, 1, 2, 3, 4, 5}; }

// Draw order per observation is fixed (x, z, d, outcome noise) so a seed
// pins the dataset exactly.
inline IVDataset generate(const SimDesign& design, std::uint64_t seed) {
  if (design.n < 10) throw ConfigError("simulation needs n >= 10");
  Rng rng(seed);
  IVDataset data;
  data.y.resize(design.n);
  data.d.resize(design.n);
  data.z.resize(design.n);
  data.x.resize(design.n, 1);
  for (int i = 0; i < design.n; ++i) {
    const double x = rng.uniform01();
    const int z = rng.bernoulli(SimDesign::propensity(x)) ? 1 : 0;
    const int d = rng.bernoulli(SimDesign::treatment_prob(z, x)) ? 1 : 0;
    const double y = SimDesign::outcome_mean(z, x) + rng.normal();
    data.x(i, 0) = x;
    data.z[i] = z;
    data.d[i] = d;
    data.y[i] = y;
  }
  return data;
}

// Population counterfactual distributions of the benchmark design, by
// adaptive quadrature:
//   beta0(y)  = int_0^1 [Phi(y - 2x^2)(x-1) + Phi(y)] dx / int_0^1 x dx
//   delta0(y) = int_0^1 Phi(y - 2x^2) x dx / int_0^1 x dx
inline void truth_oracle(const std::vector<double>& grid, std::vector<double>& beta0,
                         std::vector<double>& delta0, double abs_tol = 1e-9) {
  beta0.clear();
  delta0.clear();
  const double denom = integrate([](double x) { return x; }, 0.0, 1.0, abs_tol);
  for (double y : grid) {
    const double num_b = integrate(
        [y](double x) { return normal_cdf(y - 2.0 * x * x) * (x - 1.0) + normal_cdf(y); }, 0.0,
        1.0, abs_tol);
    const double num_d = integrate(
        [y](double x) { return normal_cdf(y - 2.0 * x * x) * x; }, 0.0, 1.0, abs_tol);
    beta0.push_back(num_b / denom);
    delta0.push_back(num_d / denom);
  }
}

inline double truth_late() {
  // E[2X^2] / E[X]
  const double num = integrate([](double x) { return 2.0 * x * x; }, 0.0, 1.0);
  const double den = integrate([](double x) { return x; }, 0.0, 1.0);
  return num / den;
}

// One estimator entry in a Monte-Carlo comparison.
struct MethodSpec {
  enum class Kind { Auto, Plugin, Kappa };
  Kind kind = Kind::Auto;
  TrimPolicy trim;  // plug-in only

  std::string label() const {
    switch (kind) {
      case Kind::Auto: return "auto";
      case Kind::Kappa: return "kappa";
      case Kind::Plugin:
        switch (trim.mode) {
          case TrimPolicy::Mode::None: return "plugin";
          case TrimPolicy::Mode::Trim: return "plugin-trim";
          case TrimPolicy::Mode::Censor: return "plugin-censor";
        }
    }
    return "?";
  }
};

struct MonteCarloConfig {
  int replications = 500;
  int n = 1000;
  std::vector<MethodSpec> methods = {MethodSpec{}};
  std::vector<double> beta_grid = default_beta_grid();
  std::vector<double> delta_grid = default_delta_grid();
  int folds = 5;
  double lambda_multiplier = 1.0;
  GammaOptions gamma;
  double plugin_lambda_multiplier = 0.01;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct MCRow {
  std::string method;
  std::string parameter;  // "beta" | "delta"
  double y = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  int failures = 0;
};

struct MCSummary {
  std::vector<MCRow> rows;
  int replications = 0;
  std::uint64_t seed = 0;

  std::string to_csv() const {
    std::ostringstream out;
    out << "method,parameter,y,median,q10,q90,failures\n";
    char buf[64];
    for (const auto& r : rows) {
      out << r.method << ',' << r.parameter << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", r.y);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", r.median);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", r.q10);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", r.q90);
      out << buf << ',' << r.failures << '\n';
    }
    return out.str();
  }
};

namespace detail {

// Deterministic parallel map over replication indices: results land in
// per-index slots, so the reduction order never depends on scheduling.
template <typename Fn>
inline void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline std::vector<double> union_grid(const std::vector<double>& a,
                                      const std::vector<double>& b) {
  std::vector<double> u = a;
  u.insert(u.end(), b.begin(), b.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

}  // namespace detail

// Replicated comparison of the configured estimators on the benchmark design.
// Replication seeds derive from the master seed; per-replication estimation
// failures (weak first stage, solver breakdowns) are counted and excluded
// from the quantiles.
inline MCSummary run_monte_carlo(const MonteCarloConfig& config) {
  if (config.replications < 2) throw ConfigError("monte carlo needs at least 2 replications");
  const std::vector<double> grid = detail::union_grid(config.beta_grid, config.delta_grid);
  const auto g = static_cast<Eigen::Index>(grid.size());
  const std::size_t n_methods = config.methods.size();

  TargetSpec target;
  target.kind = TargetKind::CounterfactualCdf;
  target.grid = grid;
  const DictionarySpec spec = benchmark_dictionary();

  // estimates[m][r] is the 2g-vector [beta; delta] or empty on failure
  std::vector<std::vector<std::optional<Eigen::VectorXd>>> estimates(
      n_methods, std::vector<std::optional<Eigen::VectorXd>>(
                     static_cast<std::size_t>(config.replications)));

  detail::parallel_for(config.replications, config.threads, [&](int r) {
    SimDesign design;
    design.n = config.n;
    const IVDataset data = generate(design, derive_seed(config.seed, 2 * static_cast<std::uint64_t>(r)));
    for (std::size_t m = 0; m < n_methods; ++m) {
      const MethodSpec& method = config.methods[m];
      try {
        if (method.kind == MethodSpec::Kind::Kappa) {
          estimates[m][static_cast<std::size_t>(r)] = fit_kappa(data, target, spec);
          continue;
        }
        EstimatorConfig est;
        est.folds = config.folds;
        est.seed = derive_seed(config.seed, 2 * static_cast<std::uint64_t>(r) + 1);
        est.alpha_method = method.kind == MethodSpec::Kind::Auto
                               ? EstimatorConfig::AlphaMethod::Auto
                               : EstimatorConfig::AlphaMethod::Plugin;
        est.riesz.lambda_multiplier = config.lambda_multiplier;
        est.gamma = config.gamma;
        est.trim = method.trim;
        est.plugin_lambda_multiplier = config.plugin_lambda_multiplier;
        const EstimateReport rep = cross_fit_estimate(data, target, spec, est);
        if (!rep.theta.allFinite()) throw EstimationError("non-finite estimate");
        estimates[m][static_cast<std::size_t>(r)] = rep.theta;
      } catch (const EstimationError&) {
        // failure recorded via the empty slot
      }
    }
  });

  MCSummary summary;
  summary.replications = config.replications;
  summary.seed = config.seed;
  for (std::size_t m = 0; m < n_methods; ++m) {
    int failures = 0;
    std::vector<std::vector<double>> values(static_cast<std::size_t>(2 * g));
    for (const auto& est : estimates[m]) {
      if (!est) {
        ++failures;
        continue;
      }
      for (Eigen::Index j = 0; j < 2 * g; ++j)
        values[static_cast<std::size_t>(j)].push_back((*est)[j]);
    }
    auto emit = [&](const std::string& parameter, const std::vector<double>& wanted,
                    Eigen::Index offset) {
      for (double y : wanted) {
        const auto it = std::find(grid.begin(), grid.end(), y);
        const auto gi = static_cast<Eigen::Index>(it - grid.begin());
        auto vals = values[static_cast<std::size_t>(offset + gi)];
        if (vals.empty())
          throw EstimationError("all replications failed for method " +
                                config.methods[m].label());
        std::sort(vals.begin(), vals.end());
        MCRow row;
        row.method = config.methods[m].label();
        row.parameter = parameter;
        row.y = y;
        row.median = order_statistic_quantile(vals, 0.5);
        row.q10 = order_statistic_quantile(vals, 0.1);
        row.q90 = order_statistic_quantile(vals, 0.9);
        row.failures = failures;
        summary.rows.push_back(row);
      }
    };
    emit("beta", config.beta_grid, 0);
    emit("delta", config.delta_grid, g);
  }
  return summary;
}

struct CoverageResult {
  int replications = 0;
  int covered = 0;
  int failures = 0;

  double rate() const {
    const int ok = replications - failures;
    return ok > 0 ? static_cast<double>(covered) / ok : 0.0;
  }
};

// Joint coverage of the simultaneous band for the delta grid on the benchmark
// design: one band per replication, success when every true delta0 lies
// inside.
inline CoverageResult run_band_coverage(int replications, int n, double alpha, int draws,
                                        std::uint64_t seed, int threads = 1,
                                        const GammaOptions& gamma = {},
                                        const std::vector<double>& delta_grid =
                                            default_delta_grid()) {
  TargetSpec target;
  target.kind = TargetKind::CounterfactualCdf;
  target.grid = delta_grid;
  const DictionarySpec spec = benchmark_dictionary();
  std::vector<double> beta0, delta0;
  truth_oracle(delta_grid, beta0, delta0);
  const auto g = static_cast<Eigen::Index>(delta_grid.size());

  std::vector<int> status(static_cast<std::size_t>(replications), -1);  // -1 fail, 0 miss, 1 cover
  detail::parallel_for(replications, threads, [&](int r) {
    SimDesign design;
    design.n = n;
    const IVDataset data = generate(design, derive_seed(seed, 3 * static_cast<std::uint64_t>(r)));
    try {
      EstimatorConfig est;
      est.seed = derive_seed(seed, 3 * static_cast<std::uint64_t>(r) + 1);
      est.gamma = gamma;
      const EstimateReport rep = cross_fit_estimate(data, target, spec, est);
      const Eigen::VectorXd theta_delta = rep.theta.segment(g, g);
      const Eigen::MatrixXd cov_delta = rep.cov.block(g, g, g, g);
      const BandResult band =
          simultaneous_band(theta_delta, cov_delta, rep.n_used, alpha, draws,
                            derive_seed(seed, 3 * static_cast<std::uint64_t>(r) + 2));
      bool ok = true;
      for (Eigen::Index j = 0; j < g; ++j)
        if (delta0[static_cast<std::size_t>(j)] < band.lower[j] ||
            delta0[static_cast<std::size_t>(j)] > band.upper[j])
          ok = false;
      status[static_cast<std::size_t>(r)] = ok ? 1 : 0;
    } catch (const EstimationError&) {
      status[static_cast<std::size_t>(r)] = -1;
    }
  });

  CoverageResult out;
  out.replications = replications;
  for (int s : status) {
    if (s < 0)
      ++out.failures;
    else if (s == 1)
      ++out.covered;
  }
  return out;
}

}  // namespace autodml
