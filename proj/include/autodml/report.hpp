#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "autodml/crossfit.hpp"
#include "autodml/inference.hpp"

namespace autodml {

inline constexpr const char* kVersion = "0.1.0";

// Minimal JSON emitter with caller-controlled key order and 17-significant-
// digit floats, so reports diff byte-for-byte across runs.
class JsonWriter {
 public:
  std::string str() const { return out_.str(); }

  void begin_object() { separator(); out_ << '{'; fresh_ = true; }
  void end_object() { out_ << '}'; fresh_ = false; }
  void begin_array() { separator(); out_ << '['; fresh_ = true; }
  void end_array() { out_ << ']'; fresh_ = false; }

  void key(const std::string& name) {
    separator();
    write_string(name);
    out_ << ':';
    fresh_ = true;
  }

  void value(double v) {
    separator();
    if (std::isfinite(v)) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out_ << buf;
    } else {
      out_ << "null";  // JSON has no inf/nan
    }
  }
  void value(int v) { separator(); out_ << v; }
  void value(long long v) { separator(); out_ << v; }
  void value(std::uint64_t v) { separator(); out_ << v; }
  void value(bool v) { separator(); out_ << (v ? "true" : "false"); }
  void value(const std::string& v) { separator(); write_string(v); }
  void value(const char* v) { separator(); write_string(v); }

  void value(const Eigen::VectorXd& v) {
    begin_array();
    for (Eigen::Index i = 0; i < v.size(); ++i) value(v[i]);
    end_array();
  }

  void value(const Eigen::MatrixXd& m) {
    begin_array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      begin_array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) value(m(i, j));
      end_array();
    }
    end_array();
  }

 private:
  void separator() {
    if (!fresh_) out_ << ',';
    fresh_ = false;
  }

  void write_string(const std::string& s) {
    out_ << '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ << "\\\""; break;
        case '\\': out_ << "\\\\"; break;
        case '\n': out_ << "\\n"; break;
        case '\t': out_ << "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ << buf;
          } else {
            out_ << c;
          }
      }
    }
    out_ << '"';
  }

  std::ostringstream out_;
  bool fresh_ = true;
};

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline void write_target(JsonWriter& w, const TargetSpec& target) {
  w.key("target");
  w.begin_object();
  w.key("kind");
  w.value(to_string(target.kind));
  if (target.kind == TargetKind::Characteristics) {
    w.key("columns");
    w.begin_array();
    for (int c : target.characteristic_columns) w.value(c + 1);
    w.end_array();
  }
  if (target.kind == TargetKind::CounterfactualCdf) {
    w.key("grid");
    w.begin_array();
    for (double y : target.grid) w.value(y);
    w.end_array();
  }
  w.end_object();
}

inline void write_config_echo(JsonWriter& w, const ConfigEcho& echo) {
  w.key("config");
  w.begin_object();
  for (const auto& [k, v] : echo) {
    w.key(k);
    w.value(v);
  }
  w.end_object();
}

}  // namespace detail

// Full estimate report. Field order is fixed: version, method, seed, target,
// n, theta, se, cov, grid, band, wald, diagnostics, config.
inline std::string render_report_json(const EstimateReport& report, const ConfigEcho& echo,
                                      const std::optional<BandResult>& band = std::nullopt,
                                      const std::optional<WaldTestResult>& wald = std::nullopt) {
  JsonWriter w;
  w.begin_object();
  w.key("version");
  w.value(kVersion);
  w.key("method");
  w.value(report.method);
  w.key("seed");
  w.value(report.seed);
  detail::write_target(w, report.target);
  w.key("n");
  w.value(static_cast<long long>(report.n));
  w.key("parameters");
  w.begin_array();
  for (const auto& label : report.target.parameter_labels()) w.value(label);
  w.end_array();
  w.key("theta");
  w.value(report.theta);
  if (report.se.size()) {
    w.key("se");
    w.value(report.se);
    w.key("cov");
    w.value(report.cov);
  }
  if (band) {
    w.key("band");
    w.begin_object();
    w.key("alpha");
    w.value(band->alpha);
    w.key("c");
    w.value(band->c);
    w.key("draws");
    w.value(band->draws);
    w.key("lower");
    w.value(band->lower);
    w.key("upper");
    w.value(band->upper);
    w.end_object();
  }
  if (wald) {
    w.key("wald");
    w.begin_object();
    w.key("W");
    w.value(wald->statistic);
    w.key("df");
    w.value(wald->df);
    w.key("p");
    w.value(wald->p_value);
    w.key("alpha");
    w.value(wald->alpha);
    w.key("reject");
    w.value(wald->reject);
    w.key("theta1");
    w.value(wald->theta1);
    w.key("theta2");
    w.value(wald->theta2);
    w.end_object();
  }
  w.key("diagnostics");
  w.begin_object();
  w.key("n_used");
  w.value(static_cast<long long>(report.n_used));
  w.key("n_dropped");
  w.value(static_cast<long long>(report.n_dropped));
  w.key("per_fold");
  w.begin_array();
  for (const auto& fold : report.per_fold) {
    w.begin_object();
    w.key("fold");
    w.value(fold.fold + 1);
    w.key("train_rows");
    w.value(static_cast<long long>(fold.train_rows));
    w.key("lambda");
    w.value(fold.lambda);
    w.key("sparsity");
    w.value(fold.sparsity);
    w.key("balance_sup_norm");
    w.value(fold.balance_sup_norm);
    w.key("max_penalty_weight");
    w.value(fold.max_penalty_weight);
    w.key("tuning_iterations");
    w.value(fold.tuning_iterations);
    w.key("converged");
    w.value(fold.inner_converged);
    w.key("dropped");
    w.value(fold.dropped);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  detail::write_config_echo(w, echo);
  w.end_object();
  return w.str();
}

// Point-estimate-only report (kappa baseline).
inline std::string render_point_report_json(const std::string& method, const TargetSpec& target,
                                            const Eigen::VectorXd& theta, Eigen::Index n,
                                            std::uint64_t seed, const ConfigEcho& echo) {
  JsonWriter w;
  w.begin_object();
  w.key("version");
  w.value(kVersion);
  w.key("method");
  w.value(method);
  w.key("seed");
  w.value(seed);
  detail::write_target(w, target);
  w.key("n");
  w.value(static_cast<long long>(n));
  w.key("parameters");
  w.begin_array();
  for (const auto& label : target.parameter_labels()) w.value(label);
  w.end_array();
  w.key("theta");
  w.value(theta);
  detail::write_config_echo(w, echo);
  w.end_object();
  return w.str();
}

}  // namespace autodml
