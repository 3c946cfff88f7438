#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autodml/crossfit.hpp"
#include "autodml/errors.hpp"
#include "autodml/linalg.hpp"
#include "autodml/numeric.hpp"
#include "autodml/rng.hpp"

namespace autodml {

struct BandResult {
  double c = 0.0;  // simultaneous critical value
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double alpha = 0.05;
  int draws = 0;
  std::uint64_t seed = 0;
};

namespace detail {
constexpr int kBandBlock = 1024;  // draws per derived-seed block
}

// Gaussian multiplier bootstrap for a simultaneous band: correlate Sigma =
// S^{-1/2} C S^{-1/2}, sample Q ~ N(0, Sigma), take c as the (1-alpha)
// empirical quantile of |Q|_inf, and form [theta_j -+ c sqrt(C_jj/n)].
// Draws are generated in fixed-size blocks with seeds derived per block, so
// the value of c does not depend on scheduling.
inline BandResult simultaneous_band(const Eigen::VectorXd& theta, const Eigen::MatrixXd& cov,
                                    Eigen::Index n, double alpha, int draws,
                                    std::uint64_t seed) {
  const Eigen::Index d = theta.size();
  if (cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("simultaneous_band: covariance shape mismatch");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("band level alpha must be in (0,1)");
  if (draws < 1000) throw ConfigError("band needs at least 1000 bootstrap draws");
  if (n < 1) throw ConfigError("band needs a positive sample size");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("simultaneous_band: covariance is not symmetric");
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(cov(j, j) > 0.0))
      throw EstimationError("degenerate coordinate " + std::to_string(j + 1) +
                            ": zero variance in the band");

  const Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd sigma = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  sigma = 0.5 * (sigma + sigma.transpose());
  Eigen::MatrixXd root;
  try {
    root = symmetric_sqrt(sigma, 1e-10);
  } catch (const std::invalid_argument&) {
    throw EstimationError("band covariance is not positive semi-definite");
  }

  std::vector<double> sup(static_cast<std::size_t>(draws));
  Eigen::VectorXd xi(d);
  const int blocks = (draws + detail::kBandBlock - 1) / detail::kBandBlock;
  for (int b = 0; b < blocks; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    const int lo = b * detail::kBandBlock;
    const int hi = std::min(draws, lo + detail::kBandBlock);
    for (int t = lo; t < hi; ++t) {
      for (Eigen::Index j = 0; j < d; ++j) xi[j] = rng.normal();
      sup[static_cast<std::size_t>(t)] = (root * xi).cwiseAbs().maxCoeff();
    }
  }
  std::sort(sup.begin(), sup.end());
  const double c = order_statistic_quantile(sup, 1.0 - alpha);

  BandResult band;
  band.c = c;
  band.alpha = alpha;
  band.draws = draws;
  band.seed = seed;
  band.lower.resize(d);
  band.upper.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double half = c * std::sqrt(cov(j, j) / static_cast<double>(n));
    band.lower[j] = theta[j] - half;
    band.upper[j] = theta[j] + half;
  }
  return band;
}

struct WaldTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
  Eigen::VectorXd theta1;
  Eigen::VectorXd theta2;
};

// Do two instruments identify the same average complier characteristics?
// Both estimates share the fold partition (same seed); the joint covariance
// comes from stacking the per-observation contributions J^{-1} psi of the two
// fits, and W compares theta1 - theta2 against chi-squared with dim(theta)
// degrees of freedom.
inline WaldTestResult instrument_equality_test(const IVDataset& data, const Eigen::VectorXi& z2,
                                               const TargetSpec& target,
                                               const DictionarySpec& spec,
                                               const EstimatorConfig& config,
                                               double alpha = 0.05) {
  if (target.kind != TargetKind::Characteristics)
    throw ConfigError("the instrument-equality test is defined for the characteristics target");
  if (z2.size() != data.n()) throw ValidationError("second instrument column length mismatch");
  for (Eigen::Index i = 0; i < z2.size(); ++i)
    if (z2[i] != 0 && z2[i] != 1)
      throw ValidationError("second instrument not in {0,1} at row " + std::to_string(i + 1));

  IVDataset swapped = data;
  swapped.z = z2;
  const EstimateReport fit1 = cross_fit_estimate(data, target, spec, config);
  const EstimateReport fit2 = cross_fit_estimate(swapped, target, spec, config);
  if (fit1.n_dropped > 0 || fit2.n_dropped > 0)
    throw EstimationError("instrument test requires untrimmed fits");

  const Eigen::Index f = fit1.theta.size();
  const Eigen::Index n = data.n();
  const Eigen::MatrixXd s1 = fit1.influence * fit1.jacobian.inverse().transpose();
  const Eigen::MatrixXd s2 = fit2.influence * fit2.jacobian.inverse().transpose();
  Eigen::MatrixXd joint(n, 2 * f);
  joint.leftCols(f) = s1;
  joint.rightCols(f) = s2;
  const Eigen::MatrixXd cov_joint = joint.transpose() * joint / static_cast<double>(n);
  // R C R' with R = [I  -I]
  const Eigen::MatrixXd rcr = cov_joint.topLeftCorner(f, f) - cov_joint.topRightCorner(f, f) -
                              cov_joint.bottomLeftCorner(f, f) +
                              cov_joint.bottomRightCorner(f, f);

  WaldTestResult res;
  res.df = static_cast<int>(f);
  res.alpha = alpha;
  res.theta1 = fit1.theta;
  res.theta2 = fit2.theta;
  const Eigen::VectorXd diff = fit1.theta - fit2.theta;
  if (diff.cwiseAbs().maxCoeff() == 0.0) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    res.reject = false;
    return res;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(rcr);
  if (!lu.isInvertible())
    throw EstimationError("joint covariance of the two estimates is singular");
  res.statistic = static_cast<double>(n) * diff.dot(lu.solve(diff));
  res.p_value = chi_squared_survival(res.statistic, res.df);
  res.reject = res.statistic > chi_squared_quantile(1.0 - alpha, res.df);
  return res;
}

}  // namespace autodml
