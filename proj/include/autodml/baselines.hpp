#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autodml/crossfit.hpp"
#include "autodml/dataset.hpp"
#include "autodml/dictionary.hpp"
#include "autodml/errors.hpp"
#include "autodml/moments.hpp"
#include "autodml/optim.hpp"

namespace autodml {

// Full-sample propensity model P(Z=1|X) on the covariate dictionary q(x).
struct PropensityFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd pi;  // fitted probability per observation, in (0,1)
  bool converged = false;
};

inline PropensityFit fit_propensity(const IVDataset& data, const DictionarySpec& spec_in,
                                    double lambda = 0.0) {
  DictionarySpec spec = spec_in;
  spec.covariate_width = static_cast<int>(data.covariate_width());
  const Standardizer std_ = make_standardizer(spec, data.x);
  const Eigen::MatrixXd q = covariate_matrix(spec, std_, data.x);
  const LogisticResult fit = fit_l1_logistic(q, data.z, lambda);
  PropensityFit out;
  out.coefficients = fit.beta;
  out.converged = fit.converged;
  out.pi.resize(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    out.pi[i] = logistic_predict(fit.beta, q.row(i).transpose());
  return out;
}

// kappa weights: kappa0 = alpha (d-1), kappa1 = alpha d,
// kappa = alpha (d - 1 + pi), with alpha the Horvitz-Thompson weight.
struct KappaWeights {
  double kappa0;
  double kappa1;
  double kappa;
};

inline KappaWeights kappa_weights(int d, int z, double pi) {
  const double alpha = z ? 1.0 / pi : -1.0 / (1.0 - pi);
  KappaWeights w;
  w.kappa0 = alpha * (d - 1.0);
  w.kappa1 = alpha * static_cast<double>(d);
  w.kappa = alpha * (d - 1.0 + pi);
  return w;
}

// Self-normalized weighted mean; invariant to rescaling all weights.
inline double self_normalized_mean(const Eigen::VectorXd& values, const Eigen::VectorXd& weights) {
  const double wsum = weights.sum();
  if (wsum == 0.0 || !std::isfinite(wsum))
    throw EstimationError("degenerate kappa weights: weight sum is " + std::to_string(wsum));
  return values.dot(weights) / wsum;
}

// kappa-weighted complier estimate from a single full-sample propensity fit.
// Uses kappa0 for untreated-potential moments and kappa1 for treated ones;
// parameters are laid out exactly like the cross-fitted estimator.
inline Eigen::VectorXd kappa_estimate(const IVDataset& data, const Eigen::VectorXd& pi_hat,
                                      const TargetSpec& target) {
  if (pi_hat.size() != data.n()) throw std::invalid_argument("kappa_estimate: length mismatch");
  target.validate(data.covariate_width());
  const Eigen::Index n = data.n();
  Eigen::VectorXd k0(n), k1(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(pi_hat[i] > 0.0 && pi_hat[i] < 1.0))
      throw EstimationError("kappa weights need propensities strictly inside (0,1)");
    const KappaWeights w = kappa_weights(data.d[i], data.z[i], pi_hat[i]);
    k0[i] = w.kappa0;
    k1[i] = w.kappa1;
  }

  Eigen::VectorXd out(target.total_params());
  switch (target.kind) {
    case TargetKind::Late: {
      const double delta = self_normalized_mean(data.y, k1);
      const double beta = self_normalized_mean(data.y, k0);
      out[0] = delta - beta;
      break;
    }
    case TargetKind::Characteristics: {
      for (std::size_t j = 0; j < target.characteristic_columns.size(); ++j)
        out[static_cast<Eigen::Index>(j)] =
            self_normalized_mean(data.x.col(target.characteristic_columns[j]), k1);
      break;
    }
    case TargetKind::CounterfactualCdf: {
      const auto g = static_cast<Eigen::Index>(target.grid.size());
      Eigen::VectorXd ind(n);
      for (Eigen::Index b = 0; b < g; ++b) {
        const double cut = target.grid[static_cast<std::size_t>(b)];
        for (Eigen::Index i = 0; i < n; ++i) ind[i] = data.y[i] <= cut ? 1.0 : 0.0;
        out[b] = self_normalized_mean(ind, k0);      // beta at this grid point
        out[g + b] = self_normalized_mean(ind, k1);  // delta
      }
      break;
    }
  }
  return out;
}

inline Eigen::VectorXd fit_kappa(const IVDataset& data, const TargetSpec& target,
                                 const DictionarySpec& spec) {
  const PropensityFit prop = fit_propensity(data, spec, /*lambda=*/0.0);
  return kappa_estimate(data, prop.pi, target);
}

// Plug-in DML: identical cross-fitting pipeline, but the balancing weight is
// the inverted l1-logistic propensity, with the trim policy applied.
inline EstimateReport fit_plugin_dml(const IVDataset& data, const TargetSpec& target,
                                     const DictionarySpec& spec, EstimatorConfig config) {
  config.alpha_method = EstimatorConfig::AlphaMethod::Plugin;
  return cross_fit_estimate(data, target, spec, config);
}

// Optional pre-processing: in the Z=0 group, drop observations whose
// estimated propensity lies outside the range observed in the Z=1 group.
// Off by default; returns the filtered dataset and the dropped count.
inline std::pair<IVDataset, int> overlap_filter(const IVDataset& data,
                                                const DictionarySpec& spec) {
  const PropensityFit prop = fit_propensity(data, spec, /*lambda=*/0.0);
  double lo = 1.0, hi = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.z[i] == 1) {
      lo = std::min(lo, prop.pi[i]);
      hi = std::max(hi, prop.pi[i]);
    }
  }
  if (lo > hi) throw EstimationError("overlap filter: no Z=1 observations");
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(data.n()));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const bool drop = data.z[i] == 0 && (prop.pi[i] < lo || prop.pi[i] > hi);
    if (!drop) keep.push_back(static_cast<int>(i));
  }
  const int dropped = static_cast<int>(data.n()) - static_cast<int>(keep.size());
  return {data.subset(keep), dropped};
}

}  // namespace autodml
