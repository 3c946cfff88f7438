#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autodml/dataset.hpp"
#include "autodml/dictionary.hpp"
#include "autodml/errors.hpp"
#include "autodml/linalg.hpp"
#include "autodml/moments.hpp"
#include "autodml/optim.hpp"
#include "autodml/riesz.hpp"

namespace autodml {

// Regression estimator for gamma(z,x) = E[V|z,x] on the shared dictionary.
// Ols solves the unpenalized projection (pseudo-inverse); Lasso runs the same
// iterative tuning loop as the balancing weight; PostLasso refits least
// squares on the selected support.
struct GammaOptions {
  enum class Method { Ols, Lasso, PostLasso };
  Method method = Method::Ols;
  double lambda_multiplier = 1.0;
};

inline std::string to_string(GammaOptions::Method m) {
  switch (m) {
    case GammaOptions::Method::Ols: return "ols";
    case GammaOptions::Method::Lasso: return "lasso";
    case GammaOptions::Method::PostLasso: return "post-lasso";
  }
  return "?";
}

// Handling of extreme estimated propensities in the plug-in method. Trim
// drops the observation from the influence average; censor clamps pi into
// [epsilon, 1-epsilon]; none inverts the raw fit.
struct TrimPolicy {
  enum class Mode { None, Trim, Censor };
  Mode mode = Mode::None;
  double epsilon = 1e-12;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("trim epsilon must be in (0, 0.5)");
  }
};

inline std::string to_string(TrimPolicy::Mode m) {
  switch (m) {
    case TrimPolicy::Mode::None: return "none";
    case TrimPolicy::Mode::Trim: return "trim";
    case TrimPolicy::Mode::Censor: return "censor";
  }
  return "?";
}

struct EstimatorConfig {
  enum class AlphaMethod { Auto, Plugin };

  int folds = 5;
  std::uint64_t seed = 0;
  AlphaMethod alpha_method = AlphaMethod::Auto;
  RieszHyper riesz;
  GammaOptions gamma;
  TrimPolicy trim;
  // scales the quantile-formula level for the l1 propensity fit; the light
  // default reproduces the instability the plug-in weight is known for
  double plugin_lambda_multiplier = 0.01;
  bool in_sample_nuisances = false;  // diagnostic: train nuisances on the full sample
  bool monotone_cdf = false;
  int threads = 1;

  void validate(Eigen::Index n) const {
    if (folds < 2 || folds > 10) throw ConfigError("folds must be in [2, 10]");
    if (n < 2 * folds) throw ConfigError("need n >= 2*folds");
    riesz.validate();
    trim.validate();
    if (plugin_lambda_multiplier <= 0)
      throw ConfigError("plugin lambda multiplier must be positive");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

inline std::string to_string(EstimatorConfig::AlphaMethod m) {
  return m == EstimatorConfig::AlphaMethod::Auto ? "auto" : "plugin";
}

struct FoldDiagnostics {
  int fold = 0;
  Eigen::Index train_rows = 0;
  double lambda = 0.0;
  int sparsity = 0;
  double balance_sup_norm = 0.0;
  double max_penalty_weight = 0.0;
  int tuning_iterations = 0;
  bool inner_converged = false;
  int dropped = 0;  // trimmed held-out rows (plug-in only)
};

struct EstimateReport {
  std::string method;
  TargetSpec target;
  Eigen::VectorXd theta;
  Eigen::VectorXd se;
  Eigen::MatrixXd cov;        // sandwich C; se_j = sqrt(C_jj / n_used)
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd omega;
  Eigen::MatrixXd influence;  // psi at theta-hat, one row per retained observation
  std::vector<FoldDiagnostics> per_fold;
  Eigen::Index n = 0;
  Eigen::Index n_used = 0;
  Eigen::Index n_dropped = 0;
  std::uint64_t seed = 0;
};

// Jacobian of the averaged moment in theta. A(theta) is affine with theta
// only in its last column, so the derivative is diagonal: -mean eta_D per
// parameter of the owning block, constant in theta.
inline Eigen::MatrixXd jacobian_from_eta_mean(const TargetSpec& target,
                                              const Eigen::VectorXd& eta_mean) {
  if (eta_mean.size() != component_count(target))
    throw std::invalid_argument("jacobian_from_eta_mean: component width mismatch");
  const Eigen::Index n_params = target.total_params();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_params, n_params);
  for (Eigen::Index b = 0; b < target.blocks(); ++b) {
    const auto comps = block_component_indices(target, b);
    const double mean_eta_d = eta_mean[comps.back()];
    for (Eigen::Index j = 0; j < target.block_param_width(); ++j) {
      const Eigen::Index col = target.param_index(b, j);
      jac(col, col) = -mean_eta_d;
    }
  }
  return jac;
}

namespace detail {

// gamma coefficients for one moment component, given the fold moments
struct GammaFitter {
  const Eigen::MatrixXd& basis;
  const Eigen::MatrixXd& gram;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  const GammaOptions& options;
  const RieszHyper& hyper;
  std::vector<Eigen::Index> intercepts;
  std::vector<Eigen::Index> sub;

  GammaFitter(const Eigen::MatrixXd& b, const Eigen::MatrixXd& g, const GammaOptions& opt,
              const RieszHyper& riesz_hyper, const DictionarySpec& spec)
      : basis(b), gram(g), eig(g), options(opt), hyper(riesz_hyper),
        intercepts(spec.intercept_coords()), sub(sub_dictionary(spec).indices) {}

  Eigen::VectorXd least_squares(const Eigen::VectorXd& m) const {
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(vals.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(vals.size());
    for (Eigen::Index i = 0; i < vals.size(); ++i)
      if (vals[i] > cutoff) inv[i] = 1.0 / vals[i];
    return eig.eigenvectors() * (inv.asDiagonal() * (eig.eigenvectors().transpose() * m));
  }

  Eigen::VectorXd fit(const Eigen::VectorXd& v) const {
    const Eigen::MatrixXd target = basis.array().colwise() * v.array();
    const Eigen::VectorXd m = target.colwise().mean();
    if (options.method == GammaOptions::Method::Ols) return least_squares(m);

    RieszHyper h = hyper;
    h.lambda_multiplier = options.lambda_multiplier;
    TunedLassoFit lasso = fit_tuned_lasso(basis, target, h, intercepts, sub);
    if (options.method == GammaOptions::Method::Lasso) return lasso.coef;

    // post-lasso: least squares restricted to the selected support
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < lasso.coef.size(); ++j)
      if (lasso.coef[j] != 0.0) support.push_back(j);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(lasso.coef.size());
    if (support.empty()) return out;
    const auto s = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd gs(s, s);
    Eigen::VectorXd ms(s);
    for (Eigen::Index a = 0; a < s; ++a) {
      ms[a] = m[support[static_cast<std::size_t>(a)]];
      for (Eigen::Index b2 = 0; b2 < s; ++b2)
        gs(a, b2) = gram(support[static_cast<std::size_t>(a)],
                         support[static_cast<std::size_t>(b2)]);
    }
    const Eigen::VectorXd coef_s = pinv_solve(gs, ms);
    for (Eigen::Index a = 0; a < s; ++a) out[support[static_cast<std::size_t>(a)]] = coef_s[a];
    return out;
  }
};

}  // namespace detail

// Horvitz-Thompson weight from a fitted propensity, with the trim policy
// applied. Returns the weight and whether the observation is excluded.
inline std::pair<double, bool> plugin_alpha(double pi_hat, int z, const TrimPolicy& policy) {
  policy.validate();
  if (!std::isfinite(pi_hat)) throw std::invalid_argument("plugin_alpha: non-finite propensity");
  double pi = pi_hat;
  bool excluded = false;
  switch (policy.mode) {
    case TrimPolicy::Mode::None:
      break;
    case TrimPolicy::Mode::Censor:
      pi = std::min(std::max(pi, policy.epsilon), 1.0 - policy.epsilon);
      break;
    case TrimPolicy::Mode::Trim:
      excluded = pi < policy.epsilon || pi > 1.0 - policy.epsilon;
      break;
  }
  const double w = z ? 1.0 / pi : -1.0 / (1.0 - pi);
  return {w, excluded};
}

// Cross-fitted de-biased estimate: per fold, fit both nuisances on the
// complement, evaluate the de-biased eta on the held-out fold, average over
// the whole sample, solve the exactly-identified system, then assemble the
// sandwich covariance from the influence values. Deterministic in
// (dataset, target, spec, config).
inline EstimateReport cross_fit_estimate(const IVDataset& data, const TargetSpec& target,
                                         const DictionarySpec& spec_in,
                                         const EstimatorConfig& config) {
  data.validate();
  DictionarySpec spec = spec_in;
  spec.covariate_width = static_cast<int>(data.covariate_width());
  spec.validate();
  target.validate(data.covariate_width());
  config.validate(data.n());

  const Eigen::Index n = data.n();
  const Eigen::Index n_comp = component_count(target);
  const FoldPartition part = partition_folds(static_cast<int>(n), config.folds, config.seed);
  const auto folds = part.fold_indices();

  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, n_comp);
  std::vector<char> excluded(static_cast<std::size_t>(n), 0);
  std::vector<FoldDiagnostics> diagnostics;

  for (int fold = 0; fold < config.folds; ++fold) {
    const std::vector<int>& test_idx = folds[static_cast<std::size_t>(fold)];
    std::vector<int> train_idx = config.in_sample_nuisances
                                     ? [&] {
                                         std::vector<int> all(static_cast<std::size_t>(n));
                                         for (Eigen::Index i = 0; i < n; ++i)
                                           all[static_cast<std::size_t>(i)] = static_cast<int>(i);
                                         return all;
                                       }()
                                     : part.complement_indices(fold);
    const IVDataset train = data.subset(train_idx);
    const IVDataset test = data.subset(test_idx);
    const Eigen::Index n_tr = train.n();
    const Eigen::Index n_te = test.n();

    const Standardizer std_ = make_standardizer(spec, train.x);
    const Eigen::MatrixXd b_tr = basis_matrix(spec, std_, train.z, train.x);
    Eigen::MatrixXd gram = b_tr.transpose() * b_tr / static_cast<double>(n_tr);
    gram = 0.5 * (gram + gram.transpose());

    FoldDiagnostics diag;
    diag.fold = fold;
    diag.train_rows = n_tr;

    // out-of-fold balancing weight
    Eigen::VectorXd alpha_te(n_te);
    std::vector<char> drop_te(static_cast<std::size_t>(n_te), 0);
    if (config.alpha_method == EstimatorConfig::AlphaMethod::Auto) {
      const Eigen::MatrixXd delta_tr = contrast_matrix(spec, std_, train.x);
      RieszFit fit = fit_balancing_weight(b_tr, delta_tr, spec, config.riesz);
      const Eigen::MatrixXd b_te = basis_matrix(spec, std_, test.z, test.x);
      alpha_te = b_te * fit.rho;
      diag.lambda = fit.lambda_used;
      diag.sparsity = fit.sparsity;
      diag.balance_sup_norm = fit.balance_sup_norm;
      diag.max_penalty_weight = fit.max_penalty_weight();
      diag.tuning_iterations = fit.tuning_iterations;
      diag.inner_converged = fit.inner_converged;
      if (!fit.inner_converged)
        throw EstimationError("balancing-weight solver did not converge on fold " +
                              std::to_string(fold + 1));
    } else {
      const Eigen::MatrixXd q_tr = covariate_matrix(spec, std_, train.x);
      const double lambda_log = config.plugin_lambda_multiplier *
                                theoretical_lambda(n_tr, q_tr.cols(), config.riesz.c1,
                                                   config.riesz.c2);
      const LogisticResult logit = fit_l1_logistic(q_tr, train.z, lambda_log);
      diag.lambda = lambda_log;
      diag.inner_converged = logit.converged;
      int sparsity = 0;
      for (Eigen::Index j = 0; j < logit.beta.size(); ++j)
        if (logit.beta[j] != 0.0) ++sparsity;
      diag.sparsity = sparsity;
      const Eigen::MatrixXd q_te = covariate_matrix(spec, std_, test.x);
      for (Eigen::Index i = 0; i < n_te; ++i) {
        const double pi = logistic_predict(logit.beta, q_te.row(i).transpose());
        auto [w, drop] = plugin_alpha(pi, test.z[i], config.trim);
        alpha_te[i] = w;
        drop_te[static_cast<std::size_t>(i)] = drop ? 1 : 0;
        if (drop) ++diag.dropped;
      }
    }

    // out-of-fold regressions, one per distinct moment component
    const Eigen::MatrixXd b_te_z = basis_matrix(spec, std_, test.z, test.x);
    const Eigen::MatrixXd b_te_1 =
        basis_matrix(spec, std_, Eigen::VectorXi::Ones(n_te), test.x);
    const Eigen::MatrixXd b_te_0 =
        basis_matrix(spec, std_, Eigen::VectorXi::Zero(n_te), test.x);
    detail::GammaFitter fitter(b_tr, gram, config.gamma, config.riesz, spec);
    Eigen::VectorXd v_tr(n_tr), v_te(n_te);
    for (Eigen::Index c = 0; c < n_comp; ++c) {
      for (Eigen::Index i = 0; i < n_tr; ++i)
        v_tr[i] = component_value(target, c, train.y[i], train.d[i], train.x.row(i).transpose());
      for (Eigen::Index i = 0; i < n_te; ++i)
        v_te[i] = component_value(target, c, test.y[i], test.d[i], test.x.row(i).transpose());
      const Eigen::VectorXd coef = fitter.fit(v_tr);
      const Eigen::VectorXd g1 = b_te_1 * coef;
      const Eigen::VectorXd g0 = b_te_0 * coef;
      const Eigen::VectorXd gz = b_te_z * coef;
      for (Eigen::Index i = 0; i < n_te; ++i) {
        const Eigen::Index row = test_idx[static_cast<std::size_t>(i)];
        eta(row, c) = g1[i] - g0[i] + alpha_te[i] * (v_te[i] - gz[i]);
      }
    }
    for (Eigen::Index i = 0; i < n_te; ++i)
      if (drop_te[static_cast<std::size_t>(i)])
        excluded[static_cast<std::size_t>(test_idx[static_cast<std::size_t>(i)])] = 1;
    diagnostics.push_back(diag);
  }

  // average eta over retained rows
  Eigen::Index n_used = 0;
  Eigen::VectorXd eta_mean = Eigen::VectorXd::Zero(n_comp);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (excluded[static_cast<std::size_t>(i)]) continue;
    eta_mean += eta.row(i).transpose();
    ++n_used;
  }
  if (n_used < 1) throw EstimationError("all observations were trimmed away");
  eta_mean /= static_cast<double>(n_used);

  // block-wise exactly-identified solve
  const Eigen::Index n_blocks = target.blocks();
  const Eigen::Index pw = target.block_param_width();
  const Eigen::Index n_params = target.total_params();
  Eigen::VectorXd theta(n_params);
  for (Eigen::Index b = 0; b < n_blocks; ++b) {
    const auto comps = block_component_indices(target, b);
    Eigen::VectorXd em(static_cast<Eigen::Index>(comps.size()));
    for (Eigen::Index c = 0; c < em.size(); ++c)
      em[c] = eta_mean[comps[static_cast<std::size_t>(c)]];
    Eigen::VectorXd theta_b;
    try {
      theta_b = solve_theta(target, em);
    } catch (const WeakFirstStageError& err) {
      std::string detail = err.what();
      detail += " (block " + std::to_string(b + 1) + " of " + std::to_string(n_blocks) + ")";
      throw WeakFirstStageError(detail);
    }
    for (Eigen::Index j = 0; j < pw; ++j) theta[target.param_index(b, j)] = theta_b[j];
  }

  // influence values psi_i(theta-hat) = A(theta) eta_i, stacked across blocks
  Eigen::MatrixXd influence(n_used, n_params);
  {
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (excluded[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index b = 0; b < n_blocks; ++b) {
        const auto comps = block_component_indices(target, b);
        const double eta_d = eta(i, comps.back());
        for (Eigen::Index j = 0; j < pw; ++j) {
          const Eigen::Index col = target.param_index(b, j);
          influence(r, col) =
              eta(i, comps[static_cast<std::size_t>(j)]) - theta[col] * eta_d;
        }
      }
      ++r;
    }
  }
  Eigen::MatrixXd jac = jacobian_from_eta_mean(target, eta_mean);

  Eigen::MatrixXd omega =
      influence.transpose() * influence / static_cast<double>(n_used);
  omega = 0.5 * (omega + omega.transpose());

  Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
  if (!lu.isInvertible())
    throw EstimationError("moment Jacobian is singular; the target is not identified");
  const Eigen::MatrixXd jinv = lu.inverse();
  Eigen::MatrixXd cov = jinv * omega * jinv.transpose();
  cov = 0.5 * (cov + cov.transpose());

  EstimateReport report;
  report.method = config.alpha_method == EstimatorConfig::AlphaMethod::Auto ? "auto" : "plugin";
  report.target = target;
  report.theta = std::move(theta);
  report.cov = std::move(cov);
  report.se.resize(n_params);
  for (Eigen::Index j = 0; j < n_params; ++j)
    report.se[j] = std::sqrt(report.cov(j, j) / static_cast<double>(n_used));
  report.jacobian = std::move(jac);
  report.omega = std::move(omega);
  report.influence = std::move(influence);
  report.per_fold = std::move(diagnostics);
  report.n = n;
  report.n_used = n_used;
  report.n_dropped = n - n_used;
  report.seed = config.seed;

  if (config.monotone_cdf && target.kind == TargetKind::CounterfactualCdf) {
    const auto g = static_cast<std::size_t>(target.grid.size());
    std::vector<double> beta(g), delta(g);
    for (std::size_t i = 0; i < g; ++i) {
      beta[i] = report.theta[static_cast<Eigen::Index>(i)];
      delta[i] = report.theta[static_cast<Eigen::Index>(g + i)];
    }
    const auto beta_iso = isotonic_fit(beta);
    const auto delta_iso = isotonic_fit(delta);
    for (std::size_t i = 0; i < g; ++i) {
      report.theta[static_cast<Eigen::Index>(i)] = beta_iso[i];
      report.theta[static_cast<Eigen::Index>(g + i)] = delta_iso[i];
    }
  }
  return report;
}

}  // namespace autodml
