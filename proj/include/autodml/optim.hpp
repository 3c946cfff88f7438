#pragma once

#include <cassert>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "autodml/errors.hpp"

namespace autodml {

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// minimize  rho' G rho - 2 rho' M + 2 lambda sum_j w_j |rho_j|
struct QuadraticProblem {
  Eigen::MatrixXd G;
  Eigen::VectorXd M;
  double lambda = 0.0;
  Eigen::VectorXd penalty_weights;  // empty means all ones
  Eigen::VectorXd init;             // empty means zeros
  double tol = 1e-8;
  int max_iter = 10000;
};

struct SolverResult {
  Eigen::VectorXd solution;
  int iterations = 0;
  double kkt_violation = 0.0;
  bool converged = false;

  int sparsity() const {
    int s = 0;
    for (Eigen::Index j = 0; j < solution.size(); ++j)
      if (solution[j] != 0.0) ++s;
    return s;
  }
};

namespace detail {

// Subgradient violation recomputed from scratch; coordinates with a zero
// diagonal are frozen and excluded from the certificate.
inline double kkt_violation(const Eigen::MatrixXd& G, const Eigen::VectorXd& M, double lambda,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& rho) {
  const Eigen::VectorXd r = G * rho - M;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < rho.size(); ++j) {
    if (G(j, j) <= 0.0) continue;
    const double t = lambda * w[j];
    double v;
    if (rho[j] != 0.0)
      v = std::abs(r[j] + (rho[j] > 0 ? t : -t));
    else
      v = std::max(0.0, std::abs(r[j]) - t);
    worst = std::max(worst, v);
  }
  return worst;
}

inline double quadratic_objective(const Eigen::MatrixXd& G, const Eigen::VectorXd& M,
                                  double lambda, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& rho) {
  double pen = 0.0;
  for (Eigen::Index j = 0; j < rho.size(); ++j) pen += w[j] * std::abs(rho[j]);
  return rho.dot(G * rho) - 2.0 * rho.dot(M) + 2.0 * lambda * pen;
}

}  // namespace detail

// Cyclic coordinate descent with exact per-coordinate minimization:
//   rho_j <- soft_threshold(M_j - sum_{m!=j} G_jm rho_m, lambda w_j) / G_jj.
// The gradient vector G*rho is maintained by rank-one column updates.
inline SolverResult solve_quadratic_lasso(const QuadraticProblem& prob) {
  const Eigen::Index p = prob.M.size();
  if (prob.G.rows() != p || prob.G.cols() != p)
    throw std::invalid_argument("solve_quadratic_lasso: G/M shape mismatch");
  if (!prob.G.allFinite() || !prob.M.allFinite())
    throw std::invalid_argument("solve_quadratic_lasso: non-finite G or M");
  if (prob.lambda < 0) throw std::invalid_argument("solve_quadratic_lasso: negative lambda");
  const double scale = std::max(1.0, prob.G.cwiseAbs().maxCoeff());
  if ((prob.G - prob.G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("solve_quadratic_lasso: G is not symmetric");

  Eigen::VectorXd w =
      prob.penalty_weights.size() ? prob.penalty_weights : Eigen::VectorXd::Ones(p);
  if (w.size() != p)
    throw std::invalid_argument("solve_quadratic_lasso: penalty weight length mismatch");
  Eigen::VectorXd rho = prob.init.size() ? prob.init : Eigen::VectorXd::Zero(p);
  if (rho.size() != p) throw std::invalid_argument("solve_quadratic_lasso: init length mismatch");

  Eigen::VectorXd grad = prob.G * rho;  // holds G * rho
#ifndef NDEBUG
  double prev_obj = detail::quadratic_objective(prob.G, prob.M, prob.lambda, w, rho);
#endif
  SolverResult res;
  int sweep = 0;
  bool small_step = false;
  for (; sweep < prob.max_iter; ++sweep) {
    double delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = prob.G(j, j);
      if (gjj <= 0.0) continue;  // flat coordinate, frozen at its init value
      const double u = prob.M[j] - (grad[j] - gjj * rho[j]);
      const double next = soft_threshold(u, prob.lambda * w[j]) / gjj;
      if (next != rho[j]) {
        const double diff = next - rho[j];
        grad.noalias() += prob.G.col(j) * diff;
        delta = std::max(delta, std::abs(diff));
        rho[j] = next;
      }
    }
#ifndef NDEBUG
    const double obj = detail::quadratic_objective(prob.G, prob.M, prob.lambda, w, rho);
    assert(obj <= prev_obj + 1e-10 * (1.0 + std::abs(prev_obj)));
    prev_obj = obj;
#endif
    if (delta < prob.tol) {
      small_step = true;
      ++sweep;
      break;
    }
  }
  res.solution = std::move(rho);
  res.iterations = sweep;
  res.kkt_violation = detail::kkt_violation(prob.G, prob.M, prob.lambda, w, res.solution);
  res.converged = small_step || res.kkt_violation <= prob.tol;
  return res;
}

// Lasso regression of v on the columns of X, reduced to the quadratic solver
// with G = X'X/n and M = X'v/n.
inline SolverResult fit_lasso_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& v,
                                         double lambda,
                                         const Eigen::VectorXd& penalty_weights = {},
                                         double tol = 1e-8, int max_iter = 10000) {
  if (X.rows() != v.size())
    throw std::invalid_argument("fit_lasso_regression: X/v shape mismatch");
  const double n = static_cast<double>(X.rows());
  QuadraticProblem prob;
  prob.G = X.transpose() * X / n;
  prob.M = X.transpose() * v / n;
  prob.lambda = lambda;
  prob.penalty_weights = penalty_weights;
  prob.tol = tol;
  prob.max_iter = max_iter;
  return solve_quadratic_lasso(prob);
}

struct LogisticResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  double kkt_violation = 0.0;
  bool converged = false;
};

namespace detail {

constexpr double kLogisticClamp = 1e-10;  // only inside the optimizer

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                 double lambda, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double pr = sigmoid(eta[i]);
    pr = std::min(std::max(pr, kLogisticClamp), 1.0 - kLogisticClamp);
    nll -= z[i] * std::log(pr) + (1.0 - z[i]) * std::log(1.0 - pr);
  }
  double pen = 0.0;
  for (Eigen::Index j = 1; j < beta.size(); ++j) pen += std::abs(beta[j]);
  return nll / static_cast<double>(z.size()) + lambda * pen;
}

}  // namespace detail

// l1-penalized logistic regression by proximal Newton: coordinate descent with
// soft-thresholding on the local quadratic model, then backtracking on the
// penalized likelihood. Column 0 must be the intercept; it is never penalized.
inline LogisticResult fit_l1_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& zi,
                                      double lambda, double tol = 1e-9, int max_outer = 100) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (zi.size() != n) throw std::invalid_argument("fit_l1_logistic: X/z shape mismatch");
  if (lambda < 0) throw std::invalid_argument("fit_l1_logistic: negative lambda");
  int ones = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (zi[i] != 0 && zi[i] != 1)
      throw std::invalid_argument("fit_l1_logistic: labels must be 0/1");
    ones += zi[i];
  }
  if (ones == 0 || ones == n)
    throw DegenerateLabelsError("all labels identical; no propensity model identifiable");

  const Eigen::VectorXd z = zi.cast<double>();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd w_pen = Eigen::VectorXd::Ones(p);
  w_pen[0] = 0.0;

  double obj = detail::logistic_objective(X, z, lambda, beta);
  LogisticResult res;
  int outer = 0;
  bool small_step = false;
  for (; outer < max_outer; ++outer) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd pr(n), wv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double pi = detail::sigmoid(eta[i]);
      pi = std::min(std::max(pi, detail::kLogisticClamp), 1.0 - detail::kLogisticClamp);
      pr[i] = pi;
      wv[i] = pi * (1.0 - pi);
    }
    // weighted working response for the local quadratic model
    const Eigen::VectorXd resp = eta.array() + (z - pr).array() / wv.array();
    const Eigen::MatrixXd Xw = X.array().colwise() * wv.array();
    QuadraticProblem local;
    local.G = X.transpose() * Xw / static_cast<double>(n);
    local.M = Xw.transpose() * resp / static_cast<double>(n);
    local.lambda = lambda;
    local.penalty_weights = w_pen;
    local.init = beta;
    local.tol = std::min(tol, 1e-10);
    const Eigen::VectorXd proposal = solve_quadratic_lasso(local).solution;

    // backtracking keeps the penalized likelihood monotone
    Eigen::VectorXd step = proposal - beta;
    double t = 1.0;
    Eigen::VectorXd cand;
    double cand_obj = obj;
    for (int ls = 0; ls < 40; ++ls) {
      cand = beta + t * step;
      cand_obj = detail::logistic_objective(X, z, lambda, cand);
      if (cand_obj <= obj + 1e-14 * (1.0 + std::abs(obj))) break;
      t *= 0.5;
    }
    const double move = (cand - beta).cwiseAbs().maxCoeff();
    beta = cand;
    obj = cand_obj;
    if (move < tol) {
      small_step = true;
      ++outer;
      break;
    }
  }

  // KKT certificate for the penalized likelihood
  Eigen::VectorXd pr(n);
  for (Eigen::Index i = 0; i < n; ++i) pr[i] = detail::sigmoid((X.row(i) * beta)(0));
  const Eigen::VectorXd grad = X.transpose() * (pr - z) / static_cast<double>(n);
  double worst = std::abs(grad[0]);
  for (Eigen::Index j = 1; j < p; ++j) {
    if (beta[j] != 0.0)
      worst = std::max(worst, std::abs(grad[j] + (beta[j] > 0 ? lambda : -lambda)));
    else
      worst = std::max(worst, std::max(0.0, std::abs(grad[j]) - lambda));
  }
  res.beta = std::move(beta);
  res.iterations = outer;
  res.kkt_violation = worst;
  res.converged = small_step || worst <= 1e-6;
  return res;
}

// Fitted probability with the linear predictor mapped into the open unit
// interval at the floating-point boundary, so downstream inverse weights stay
// finite.
inline double logistic_predict(const Eigen::VectorXd& beta, const Eigen::VectorXd& row) {
  double pr = detail::sigmoid(beta.dot(row));
  const double hi = 1.0 - 1.1102230246251565e-16;  // largest double below 1
  return std::min(std::max(pr, 1e-300), hi);
}

}  // namespace autodml
