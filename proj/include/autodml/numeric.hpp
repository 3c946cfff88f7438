#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace autodml {

inline double normal_cdf(double x) {
  // relative error < 1e-15 on the interesting range via erfc
  return 0.5 * std::erfc(-x * M_SQRT1_2);
}

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0,1]");
  }
  static const boost::math::normal_distribution<double> dist;
  return boost::math::quantile(dist, p);
}

inline double chi_squared_survival(double w, int df) {
  if (w < 0 || df < 1) throw std::domain_error("chi_squared_survival: bad arguments");
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, w));
}

inline double chi_squared_quantile(double p, int df) {
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::quantile(dist, p);
}

// Adaptive Gauss-Kronrod integration on a finite interval.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = 1e-9) {
  double error = 0.0;
  double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, /*max_depth=*/15, /*tol=*/abs_tol, &error);
  return value;
}

// Empirical quantile as the ceiling-index order statistic: the q-quantile of
// a sorted sample v[0..N-1] is v[ceil(q*N)-1]. This convention is shared by
// the bootstrap critical value and the Monte-Carlo summaries so results are
// reproducible bit-exactly.
inline double order_statistic_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::domain_error("order_statistic_quantile: empty sample");
  const auto n = static_cast<std::ptrdiff_t>(sorted.size());
  auto idx = static_cast<std::ptrdiff_t>(std::ceil(q * static_cast<double>(n))) - 1;
  idx = std::clamp<std::ptrdiff_t>(idx, 0, n - 1);
  return sorted[static_cast<std::size_t>(idx)];
}

}  // namespace autodml
