#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autodml/errors.hpp"

namespace autodml {

// Two parametrizations of the same function space. MainInteraction stacks the
// covariate dictionary q(x) with its instrument interaction, b = [q; z*q].
// Split separates the two instrument arms, b = [z*q; (1-z)*q]; the balance
// diagnostic is stated in this parametrization.
enum class DictionaryLayout { MainInteraction, Split };

inline std::string to_string(DictionaryLayout layout) {
  return layout == DictionaryLayout::MainInteraction ? "main-interaction" : "split";
}

// Recipe for q(x): intercept, then ascending powers per covariate, then
// pairwise interactions (i<j, row-major). The instrument block follows per
// the layout. Coordinate ordering is frozen so coefficient vectors are
// comparable across runs.
struct DictionarySpec {
  int degree = 4;
  bool interactions = false;
  DictionaryLayout layout = DictionaryLayout::MainInteraction;
  bool standardize = true;
  int covariate_width = 1;

  Eigen::Index q_width() const {
    Eigen::Index w = 1 + static_cast<Eigen::Index>(covariate_width) * degree;
    if (interactions)
      w += static_cast<Eigen::Index>(covariate_width) * (covariate_width - 1) / 2;
    return w;
  }

  Eigen::Index width() const { return 2 * q_width(); }

  std::vector<Eigen::Index> intercept_coords() const {
    if (layout == DictionaryLayout::Split) return {0, q_width()};
    return {0};
  }

  void validate() const {
    if (degree < 0) throw ConfigError("dictionary degree must be >= 0");
    if (covariate_width < 1) throw ConfigError("covariate width must be >= 1");
  }
};

// Per-covariate centering and scaling, fitted on whatever rows the caller
// trains on. Zero-variance covariates are centered but left unscaled.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    const auto n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean();
    s.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double var = (x.col(j).array() - s.mean[j]).square().sum() / n;
      s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  static Standardizer identity(Eigen::Index k) {
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(k);
    s.scale = Eigen::VectorXd::Ones(k);
    return s;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return (x - mean).cwiseQuotient(scale);
  }
};

inline Standardizer make_standardizer(const DictionarySpec& spec, const Eigen::MatrixXd& rows) {
  return spec.standardize ? Standardizer::fit(rows) : Standardizer::identity(rows.cols());
}

// q(x) for one observation.
inline Eigen::VectorXd expand_covariates(const DictionarySpec& spec, const Standardizer& std_,
                                         const Eigen::VectorXd& x) {
  if (x.size() != spec.covariate_width)
    throw ConfigError("covariate width " + std::to_string(x.size()) +
                      " does not match dictionary width " +
                      std::to_string(spec.covariate_width));
  const Eigen::VectorXd xs = std_.apply(x);
  Eigen::VectorXd q(spec.q_width());
  Eigen::Index at = 0;
  q[at++] = 1.0;
  for (Eigen::Index j = 0; j < xs.size(); ++j) {
    double pw = 1.0;
    for (int deg = 1; deg <= spec.degree; ++deg) {
      pw *= xs[j];
      q[at++] = pw;
    }
  }
  if (spec.interactions)
    for (Eigen::Index i = 0; i < xs.size(); ++i)
      for (Eigen::Index j = i + 1; j < xs.size(); ++j) q[at++] = xs[i] * xs[j];
  return q;
}

inline Eigen::VectorXd expand(const DictionarySpec& spec, const Standardizer& std_, int z,
                              const Eigen::VectorXd& x) {
  const Eigen::VectorXd q = expand_covariates(spec, std_, x);
  const Eigen::Index qw = q.size();
  Eigen::VectorXd b(2 * qw);
  if (spec.layout == DictionaryLayout::MainInteraction) {
    b.head(qw) = q;
    b.tail(qw) = z ? q : Eigen::VectorXd::Zero(qw);
  } else {
    b.head(qw) = z ? q : Eigen::VectorXd::Zero(qw);
    b.tail(qw) = z ? Eigen::VectorXd::Zero(qw) : q;
  }
  return b;
}

// b(1,x) - b(0,x); equals expand(spec,1,x) - expand(spec,0,x) coordinate-wise.
inline Eigen::VectorXd instrument_contrast(const DictionarySpec& spec, const Standardizer& std_,
                                           const Eigen::VectorXd& x) {
  const Eigen::VectorXd q = expand_covariates(spec, std_, x);
  const Eigen::Index qw = q.size();
  Eigen::VectorXd c(2 * qw);
  if (spec.layout == DictionaryLayout::MainInteraction) {
    c.head(qw).setZero();
    c.tail(qw) = q;
  } else {
    c.head(qw) = q;
    c.tail(qw) = -q;
  }
  return c;
}

// Batched builders used by the estimators.
inline Eigen::MatrixXd covariate_matrix(const DictionarySpec& spec, const Standardizer& std_,
                                        const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), spec.q_width());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out.row(i) = expand_covariates(spec, std_, x.row(i).transpose()).transpose();
  return out;
}

inline Eigen::MatrixXd basis_matrix(const DictionarySpec& spec, const Standardizer& std_,
                                    const Eigen::VectorXi& z, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), spec.width());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out.row(i) = expand(spec, std_, z[i], x.row(i).transpose()).transpose();
  return out;
}

inline Eigen::MatrixXd contrast_matrix(const DictionarySpec& spec, const Standardizer& std_,
                                       const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), spec.width());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out.row(i) = instrument_contrast(spec, std_, x.row(i).transpose()).transpose();
  return out;
}

// Low-dimensional prefix used to initialize the balancing-weight tuning loop:
// ceil(p/40) coordinates, never fewer than 2, always including the intercept.
struct SubDictionary {
  std::vector<Eigen::Index> indices;

  Eigen::Index size() const { return static_cast<Eigen::Index>(indices.size()); }
};

inline SubDictionary sub_dictionary(const DictionarySpec& spec) {
  const Eigen::Index p = spec.width();
  Eigen::Index size = (p + 39) / 40;
  size = std::max<Eigen::Index>(size, 2);
  size = std::min(size, p);
  SubDictionary sub;
  sub.indices.resize(static_cast<std::size_t>(size));
  for (Eigen::Index i = 0; i < size; ++i) sub.indices[static_cast<std::size_t>(i)] = i;
  return sub;
}

}  // namespace autodml
