#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autodml/dictionary.hpp"
#include "autodml/errors.hpp"
#include "autodml/linalg.hpp"
#include "autodml/numeric.hpp"
#include "autodml/optim.hpp"

namespace autodml {

// Tuning constants for the iterative regularization loop. (c1, c2, c3) follow
// the practical defaults; lambda_multiplier rescales the quantile-based level
// for sensitivity runs.
struct RieszHyper {
  double c1 = 1.0;
  double c2 = 0.1;
  double c3 = 0.1;
  double ridge_on_norm = 0.2;
  int max_outer_iter = 10;
  double lambda_multiplier = 1.0;

  void validate() const {
    if (c1 <= 0 || c2 <= 0 || c3 <= 0 || ridge_on_norm <= 0 || max_outer_iter <= 0 ||
        lambda_multiplier <= 0)
      throw ConfigError("tuning hyper-parameters must all be positive");
  }
};

// lambda_n = (c1 / sqrt(n_f)) * Phi^{-1}(1 - c2 / (2p))
inline double theoretical_lambda(Eigen::Index n_f, Eigen::Index p, double c1 = 1.0,
                                 double c2 = 0.1) {
  if (n_f < 2 || p < 1 || c2 <= 0 || c2 >= 2.0 * static_cast<double>(p))
    throw ConfigError("theoretical_lambda: need n_f >= 2, p >= 1, 0 < c2 < 2p");
  return c1 / std::sqrt(static_cast<double>(n_f)) *
         normal_quantile(1.0 - c2 / (2.0 * static_cast<double>(p)));
}

// G = (1/n) sum_i b_i b_i',  M = (1/n) sum_i delta_i
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> compute_moments(const Eigen::MatrixXd& basis,
                                                                   const Eigen::MatrixXd& delta) {
  if (basis.rows() != delta.rows() || basis.cols() != delta.cols())
    throw std::invalid_argument("compute_moments: shape mismatch");
  if (basis.rows() < 1) throw std::invalid_argument("compute_moments: empty input");
  const double n = static_cast<double>(basis.rows());
  Eigen::MatrixXd g = basis.transpose() * basis / n;
  g = 0.5 * (g + g.transpose());  // exact symmetry
  return {std::move(g), delta.colwise().mean()};
}

// Outcome of the iteratively tuned l1 fit. `foc_sup_norm` is |M - G coef|_inf,
// recomputed from the final coefficients.
struct TunedLassoFit {
  Eigen::VectorXd coef;
  double lambda_used = 0.0;
  Eigen::VectorXd d_norm;           // final normalization diagonal, before the ridge
  Eigen::VectorXd penalty_weights;  // (d_norm + ridge), c3-scaled on intercepts
  int tuning_iterations = 0;
  bool inner_converged = false;
  bool outer_converged = false;
  double foc_sup_norm = 0.0;
  int sparsity = 0;

  double max_penalty_weight() const {
    return penalty_weights.size() ? penalty_weights.maxCoeff() : 0.0;
  }
};

// Iterative tuning loop shared by the balancing-weight fit and the
// moment-target regressions. `target` holds one row per observation; for the
// balancing weight it is the instrument contrast b(1,x)-b(0,x), and for a
// regression of v on the dictionary it is b * v. The loop:
//   1. initialize by least squares on the sub-dictionary, padded with zeros
//   2. freeze the moments (G, M)
//   3. until the coefficients settle (or the iteration cap):
//      re-estimate the per-coordinate normalization from current residuals,
//      set the quantile-based lambda, re-solve the weighted lasso warm-started
//      at the previous coefficients.
inline TunedLassoFit fit_tuned_lasso(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& target,
                                     const RieszHyper& hyper,
                                     const std::vector<Eigen::Index>& intercept_coords,
                                     const std::vector<Eigen::Index>& sub_indices,
                                     double inner_tol = 1e-8, int inner_max_iter = 10000) {
  hyper.validate();
  const Eigen::Index n = basis.rows();
  const Eigen::Index p = basis.cols();
  auto [g, m] = compute_moments(basis, target);

  const double lambda =
      hyper.lambda_multiplier * theoretical_lambda(n, p, hyper.c1, hyper.c2);
  if (!(lambda > 0.0))
    throw ConfigError("degenerate regularization level lambda_n = 0; adjust c2");

  // sub-dictionary least-squares initialization (pseudo-inverse if singular)
  const Eigen::Index s = static_cast<Eigen::Index>(sub_indices.size());
  Eigen::MatrixXd g_low(s, s);
  Eigen::VectorXd m_low(s);
  for (Eigen::Index a = 0; a < s; ++a) {
    m_low[a] = m[sub_indices[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < s; ++b)
      g_low(a, b) = g(sub_indices[static_cast<std::size_t>(a)],
                      sub_indices[static_cast<std::size_t>(b)]);
  }
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd rho_low = pinv_solve(g_low, m_low);
  for (Eigen::Index a = 0; a < s; ++a) rho[sub_indices[static_cast<std::size_t>(a)]] = rho_low[a];

  TunedLassoFit fit;
  fit.lambda_used = lambda;
  int iter = 0;
  for (; iter < hyper.max_outer_iter; ++iter) {
    // residual normalization: D_jj = sqrt((1/n) sum_i [b_ij (b_i'rho) - t_ij]^2)
    const Eigen::VectorXd fitted = basis * rho;
    Eigen::MatrixXd resid = basis.array().colwise() * fitted.array();
    resid -= target;
    fit.d_norm = resid.array().square().colwise().mean().sqrt();

    Eigen::VectorXd weights = fit.d_norm.array() + hyper.ridge_on_norm;
    for (Eigen::Index ic : intercept_coords) weights[ic] *= hyper.c3;

    QuadraticProblem prob;
    prob.G = g;
    prob.M = m;
    prob.lambda = lambda;
    prob.penalty_weights = weights;
    prob.init = rho;
    prob.tol = inner_tol;
    prob.max_iter = inner_max_iter;
    SolverResult inner = solve_quadratic_lasso(prob);

    const double move = (inner.solution - rho).cwiseAbs().maxCoeff();
    rho = std::move(inner.solution);
    fit.penalty_weights = std::move(weights);
    fit.inner_converged = inner.converged;
    if (move < 1e-6) {
      fit.outer_converged = true;
      ++iter;
      break;
    }
  }
  fit.tuning_iterations = iter;
  fit.coef = std::move(rho);
  fit.foc_sup_norm = (m - g * fit.coef).cwiseAbs().maxCoeff();
  fit.sparsity = 0;
  for (Eigen::Index j = 0; j < p; ++j)
    if (fit.coef[j] != 0.0) ++fit.sparsity;
  return fit;
}

// Balancing-weight estimate on one fold complement. The l1 first-order
// condition ties the fit to the sample balance bound:
//   |M - G rho|_inf <= lambda * max penalty weight (+ solver tolerance).
struct RieszFit {
  Eigen::VectorXd rho;
  double lambda_used = 0.0;
  Eigen::VectorXd d_norm;
  Eigen::VectorXd penalty_weights;
  int tuning_iterations = 0;
  double balance_sup_norm = 0.0;
  int sparsity = 0;
  bool inner_converged = false;
  bool outer_converged = false;

  double max_penalty_weight() const {
    return penalty_weights.size() ? penalty_weights.maxCoeff() : 0.0;
  }
};

inline RieszFit fit_balancing_weight(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& contrast,
                                     const DictionarySpec& spec, const RieszHyper& hyper) {
  const Eigen::Index p = spec.width();
  const Eigen::Index min_rows =
      std::max<Eigen::Index>(p / 10, 20);  // tiny folds make the moment matrix meaningless
  if (basis.rows() < min_rows)
    throw ConfigError("balancing-weight fit needs at least " + std::to_string(min_rows) +
                      " observations, got " + std::to_string(basis.rows()));
  const SubDictionary sub = sub_dictionary(spec);
  TunedLassoFit fit = fit_tuned_lasso(basis, contrast, hyper, spec.intercept_coords(),
                                      sub.indices);
  RieszFit out;
  out.rho = std::move(fit.coef);
  out.lambda_used = fit.lambda_used;
  out.d_norm = std::move(fit.d_norm);
  out.penalty_weights = std::move(fit.penalty_weights);
  out.tuning_iterations = fit.tuning_iterations;
  out.balance_sup_norm = fit.foc_sup_norm;
  out.sparsity = fit.sparsity;
  out.inner_converged = fit.inner_converged;
  out.outer_converged = fit.outer_converged;
  return out;
}

inline double predict_alpha(const RieszFit& fit, const DictionarySpec& spec,
                            const Standardizer& std_, int z, const Eigen::VectorXd& x) {
  const Eigen::VectorXd b = expand(spec, std_, z, x);
  if (b.size() != fit.rho.size())
    throw std::invalid_argument("predict_alpha: dictionary width mismatch");
  return b.dot(fit.rho);
}

}  // namespace autodml
