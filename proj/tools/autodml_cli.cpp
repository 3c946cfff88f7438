// Command-line front end: fit complier parameters from a CSV, replicate the
// benchmark simulations, print the simulation truth table, and test whether
// two instruments identify the same compliers.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autodml/autodml.hpp"

namespace {

using autodml::ConfigError;
using autodml::ConfigEcho;

struct Options {
  // data & schema
  std::string data_path;
  std::string y_column = "y";
  std::string d_column = "d";
  std::string z_column = "z";
  std::string z2_column;
  std::vector<std::string> x_columns;  // empty: every remaining column
  // target
  std::string target = "late";
  std::vector<double> grid;
  std::vector<std::string> chars_columns;  // default: all covariates
  // dictionary
  int degree = 4;
  bool interactions = false;
  std::string layout = "main-interaction";
  bool standardize = true;
  // estimator
  std::string method = "auto";
  int folds = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  double c1 = 1.0, c2 = 0.1, c3 = 0.1;
  double ridge_on_norm = 0.2;
  int max_outer_iter = 10;
  double lambda_multiplier = 1.0;
  std::string gamma_method = "ols";
  double gamma_lambda_multiplier = 1.0;
  double plugin_lambda_multiplier = 0.01;
  std::string trim = "none";
  double epsilon = 1e-12;
  bool monotone = false;
  bool overlap_filter = false;
  // inference
  double alpha = 0.05;
  int bootstrap_draws = 10000;
  // simulate
  std::string design = "appendix-f";
  int reps = 500;
  int n = 1000;
  // output
  std::string out_path;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    const auto a = cur.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const auto b = cur.find_last_not_of(" \t");
    out.push_back(cur.substr(a, b - a + 1));
  }
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad grid value '" + tok + "'");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + value + "'");
}

// Flat key = value file; '#' starts a comment; unknown keys are rejected.
void apply_config_file(Options& opt, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key = value");
    auto trim_ws = [](std::string s) {
      const auto x = s.find_first_not_of(" \t\r");
      if (x == std::string::npos) return std::string();
      const auto y = s.find_last_not_of(" \t\r");
      return s.substr(x, y - x + 1);
    };
    const std::string key = trim_ws(line.substr(0, eq));
    const std::string value = trim_ws(line.substr(eq + 1));
    if (key == "data") opt.data_path = value;
    else if (key == "y_column") opt.y_column = value;
    else if (key == "d_column") opt.d_column = value;
    else if (key == "z_column") opt.z_column = value;
    else if (key == "z2_column") opt.z2_column = value;
    else if (key == "x_columns") opt.x_columns = split_list(value);
    else if (key == "target") opt.target = value;
    else if (key == "grid") opt.grid = parse_grid(value);
    else if (key == "chars_columns") opt.chars_columns = split_list(value);
    else if (key == "degree") opt.degree = std::stoi(value);
    else if (key == "interactions") opt.interactions = parse_bool(key, value);
    else if (key == "layout") opt.layout = value;
    else if (key == "standardize") opt.standardize = parse_bool(key, value);
    else if (key == "method") opt.method = value;
    else if (key == "folds") opt.folds = std::stoi(value);
    else if (key == "seed") opt.seed = std::stoull(value);
    else if (key == "threads") opt.threads = std::stoi(value);
    else if (key == "c1") opt.c1 = std::stod(value);
    else if (key == "c2") opt.c2 = std::stod(value);
    else if (key == "c3") opt.c3 = std::stod(value);
    else if (key == "ridge_on_norm") opt.ridge_on_norm = std::stod(value);
    else if (key == "max_outer_iter") opt.max_outer_iter = std::stoi(value);
    else if (key == "lambda_multiplier") opt.lambda_multiplier = std::stod(value);
    else if (key == "gamma_method") opt.gamma_method = value;
    else if (key == "gamma_lambda_multiplier") opt.gamma_lambda_multiplier = std::stod(value);
    else if (key == "plugin_lambda_multiplier") opt.plugin_lambda_multiplier = std::stod(value);
    else if (key == "trim") opt.trim = value;
    else if (key == "epsilon") opt.epsilon = std::stod(value);
    else if (key == "monotone") opt.monotone = parse_bool(key, value);
    else if (key == "overlap_filter") opt.overlap_filter = parse_bool(key, value);
    else if (key == "alpha") opt.alpha = std::stod(value);
    else if (key == "bootstrap_draws") opt.bootstrap_draws = std::stoi(value);
    else if (key == "design") opt.design = value;
    else if (key == "reps") opt.reps = std::stoi(value);
    else if (key == "n") opt.n = std::stoi(value);
    else if (key == "out") opt.out_path = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

autodml::TargetSpec make_target(const Options& opt, const std::vector<std::string>& covariates) {
  autodml::TargetSpec target;
  if (opt.target == "late") {
    target.kind = autodml::TargetKind::Late;
  } else if (opt.target == "chars") {
    target.kind = autodml::TargetKind::Characteristics;
    std::vector<std::string> wanted =
        opt.chars_columns.empty() ? covariates : opt.chars_columns;
    for (const auto& name : wanted) {
      const auto it = std::find(covariates.begin(), covariates.end(), name);
      if (it == covariates.end())
        throw ConfigError("chars column '" + name + "' is not a covariate column");
      target.characteristic_columns.push_back(static_cast<int>(it - covariates.begin()));
    }
  } else if (opt.target == "cdf") {
    target.kind = autodml::TargetKind::CounterfactualCdf;
    target.grid = opt.grid;
  } else {
    throw ConfigError("target must be late, chars, or cdf");
  }
  return target;
}

autodml::DictionarySpec make_dictionary(const Options& opt, int covariate_width) {
  autodml::DictionarySpec spec;
  spec.degree = opt.degree;
  spec.interactions = opt.interactions;
  if (opt.layout == "main-interaction")
    spec.layout = autodml::DictionaryLayout::MainInteraction;
  else if (opt.layout == "split")
    spec.layout = autodml::DictionaryLayout::Split;
  else
    throw ConfigError("layout must be main-interaction or split");
  spec.standardize = opt.standardize;
  spec.covariate_width = covariate_width;
  return spec;
}

autodml::EstimatorConfig make_estimator(const Options& opt) {
  autodml::EstimatorConfig config;
  config.folds = opt.folds;
  config.seed = opt.seed;
  config.threads = opt.threads;
  config.riesz.c1 = opt.c1;
  config.riesz.c2 = opt.c2;
  config.riesz.c3 = opt.c3;
  config.riesz.ridge_on_norm = opt.ridge_on_norm;
  config.riesz.max_outer_iter = opt.max_outer_iter;
  config.riesz.lambda_multiplier = opt.lambda_multiplier;
  if (opt.gamma_method == "ols")
    config.gamma.method = autodml::GammaOptions::Method::Ols;
  else if (opt.gamma_method == "lasso")
    config.gamma.method = autodml::GammaOptions::Method::Lasso;
  else if (opt.gamma_method == "post-lasso")
    config.gamma.method = autodml::GammaOptions::Method::PostLasso;
  else
    throw ConfigError("gamma_method must be ols, lasso, or post-lasso");
  config.gamma.lambda_multiplier = opt.gamma_lambda_multiplier;
  config.plugin_lambda_multiplier = opt.plugin_lambda_multiplier;
  if (opt.trim == "none")
    config.trim.mode = autodml::TrimPolicy::Mode::None;
  else if (opt.trim == "trim")
    config.trim.mode = autodml::TrimPolicy::Mode::Trim;
  else if (opt.trim == "censor")
    config.trim.mode = autodml::TrimPolicy::Mode::Censor;
  else
    throw ConfigError("trim must be none, trim, or censor");
  config.trim.epsilon = opt.epsilon;
  config.monotone_cdf = opt.monotone;
  if (opt.method == "auto")
    config.alpha_method = autodml::EstimatorConfig::AlphaMethod::Auto;
  else if (opt.method == "plugin")
    config.alpha_method = autodml::EstimatorConfig::AlphaMethod::Plugin;
  else if (opt.method != "kappa")
    throw ConfigError("method must be auto, plugin, or kappa");
  return config;
}

ConfigEcho make_echo(const Options& opt) {
  ConfigEcho echo;
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  echo.emplace_back("data", opt.data_path);
  echo.emplace_back("y_column", opt.y_column);
  echo.emplace_back("d_column", opt.d_column);
  echo.emplace_back("z_column", opt.z_column);
  if (!opt.z2_column.empty()) echo.emplace_back("z2_column", opt.z2_column);
  {
    std::string xs;
    for (const auto& c : opt.x_columns) xs += (xs.empty() ? "" : ",") + c;
    echo.emplace_back("x_columns", xs);
  }
  echo.emplace_back("target", opt.target);
  if (!opt.grid.empty()) {
    std::string gs;
    for (double v : opt.grid) gs += (gs.empty() ? "" : ",") + num(v);
    echo.emplace_back("grid", gs);
  }
  echo.emplace_back("method", opt.method);
  echo.emplace_back("degree", std::to_string(opt.degree));
  echo.emplace_back("interactions", opt.interactions ? "true" : "false");
  echo.emplace_back("layout", opt.layout);
  echo.emplace_back("standardize", opt.standardize ? "true" : "false");
  echo.emplace_back("folds", std::to_string(opt.folds));
  echo.emplace_back("seed", std::to_string(opt.seed));
  echo.emplace_back("threads", std::to_string(opt.threads));
  echo.emplace_back("c1", num(opt.c1));
  echo.emplace_back("c2", num(opt.c2));
  echo.emplace_back("c3", num(opt.c3));
  echo.emplace_back("ridge_on_norm", num(opt.ridge_on_norm));
  echo.emplace_back("max_outer_iter", std::to_string(opt.max_outer_iter));
  echo.emplace_back("lambda_multiplier", num(opt.lambda_multiplier));
  echo.emplace_back("gamma_method", opt.gamma_method);
  echo.emplace_back("gamma_lambda_multiplier", num(opt.gamma_lambda_multiplier));
  echo.emplace_back("plugin_lambda_multiplier", num(opt.plugin_lambda_multiplier));
  echo.emplace_back("trim", opt.trim);
  echo.emplace_back("epsilon", num(opt.epsilon));
  echo.emplace_back("monotone", opt.monotone ? "true" : "false");
  echo.emplace_back("overlap_filter", opt.overlap_filter ? "true" : "false");
  echo.emplace_back("alpha", num(opt.alpha));
  echo.emplace_back("bootstrap_draws", std::to_string(opt.bootstrap_draws));
  return echo;
}

void write_output(const Options& opt, const std::string& text) {
  if (opt.out_path.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(opt.out_path);
  if (!out) throw autodml::DataError("cannot write output file: " + opt.out_path);
  out << text << '\n';
}

// Loads the CSV with the configured schema; empty x_columns means every
// column that is not y/d/z(/z2), in header order.
autodml::IVDataset load_data(Options& opt) {
  if (opt.data_path.empty()) throw ConfigError("no data file given (use --data)");
  if (opt.x_columns.empty()) {
    std::ifstream in(opt.data_path);
    if (!in) throw autodml::DataError("cannot open data file: " + opt.data_path);
    std::string header;
    if (!std::getline(in, header)) throw autodml::ParseError("empty file: " + opt.data_path);
    for (const auto& col : split_list(header)) {
      if (col == opt.y_column || col == opt.d_column || col == opt.z_column ||
          col == opt.z2_column)
        continue;
      opt.x_columns.push_back(col);
    }
  }
  autodml::CsvSchema schema{opt.y_column, opt.d_column, opt.z_column, opt.x_columns};
  return autodml::load_csv(opt.data_path, schema);
}

int cmd_fit(Options& opt) {
  autodml::IVDataset data = load_data(opt);
  const auto target = make_target(opt, opt.x_columns);
  const auto spec = make_dictionary(opt, static_cast<int>(data.covariate_width()));
  const auto echo = make_echo(opt);
  if (opt.overlap_filter) {
    auto [filtered, dropped] = autodml::overlap_filter(data, spec);
    data = std::move(filtered);
    (void)dropped;
  }
  if (opt.method == "kappa") {
    const Eigen::VectorXd theta = autodml::fit_kappa(data, target, spec);
    write_output(opt, autodml::render_point_report_json("kappa", target, theta, data.n(),
                                                        opt.seed, echo));
    return 0;
  }
  const auto config = make_estimator(opt);
  const autodml::EstimateReport report = autodml::cross_fit_estimate(data, target, spec, config);
  std::optional<autodml::BandResult> band;
  if (target.kind == autodml::TargetKind::CounterfactualCdf)
    band = autodml::simultaneous_band(report.theta, report.cov, report.n_used, opt.alpha,
                                      opt.bootstrap_draws,
                                      autodml::derive_seed(opt.seed, 0x62616e64ULL));
  write_output(opt, autodml::render_report_json(report, echo, band));
  return 0;
}

int cmd_simulate(Options& opt) {
  if (opt.design != "appendix-f")
    throw ConfigError("unknown design '" + opt.design + "' (available: appendix-f)");
  autodml::MonteCarloConfig mc;
  mc.replications = opt.reps;
  mc.n = opt.n;
  mc.folds = opt.folds;
  mc.lambda_multiplier = opt.lambda_multiplier;
  mc.plugin_lambda_multiplier = opt.plugin_lambda_multiplier;
  mc.seed = opt.seed;
  mc.threads = opt.threads;
  autodml::EstimatorConfig est = make_estimator(opt);  // validates method/gamma/trim names
  mc.gamma = est.gamma;
  autodml::MethodSpec method;
  if (opt.method == "auto") method.kind = autodml::MethodSpec::Kind::Auto;
  else if (opt.method == "plugin") method.kind = autodml::MethodSpec::Kind::Plugin;
  else method.kind = autodml::MethodSpec::Kind::Kappa;
  method.trim = est.trim;
  mc.methods = {method};
  const autodml::MCSummary summary = autodml::run_monte_carlo(mc);
  std::string csv = summary.to_csv();
  if (!csv.empty() && csv.back() == '\n') csv.pop_back();
  write_output(opt, csv);
  return 0;
}

int cmd_truth(Options& opt) {
  std::vector<double> beta_grid = autodml::default_beta_grid();
  std::vector<double> delta_grid = autodml::default_delta_grid();
  if (!opt.grid.empty()) {
    beta_grid = opt.grid;
    delta_grid = opt.grid;
  }
  std::vector<double> beta0, delta0;
  std::ostringstream out;
  out << "parameter,y,value\n";
  char buf[64];
  autodml::truth_oracle(beta_grid, beta0, delta0);
  for (std::size_t i = 0; i < beta_grid.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", beta_grid[i]);
    out << "beta," << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", beta0[i]);
    out << buf << '\n';
  }
  autodml::truth_oracle(delta_grid, beta0, delta0);
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", delta_grid[i]);
    out << "delta," << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", delta0[i]);
    out << buf << '\n';
  }
  std::string csv = out.str();
  csv.pop_back();
  write_output(opt, csv);
  return 0;
}

int cmd_test_instruments(Options& opt) {
  if (opt.z2_column.empty())
    throw ConfigError("test-instruments needs z2_column in the config");
  autodml::IVDataset data = load_data(opt);
  // second instrument column, parsed with the same binary rule
  Eigen::VectorXi z2;
  {
    autodml::CsvSchema schema{opt.y_column, opt.d_column, opt.z2_column, opt.x_columns};
    const autodml::IVDataset alt = autodml::load_csv(opt.data_path, schema);
    z2 = alt.z;
  }
  opt.target = "chars";
  const auto target = make_target(opt, opt.x_columns);
  const auto spec = make_dictionary(opt, static_cast<int>(data.covariate_width()));
  const auto config = make_estimator(opt);
  const autodml::WaldTestResult wald =
      autodml::instrument_equality_test(data, z2, target, spec, config, opt.alpha);
  // reuse the first fit's report shell for serialization
  const autodml::EstimateReport report = autodml::cross_fit_estimate(data, target, spec, config);
  write_output(opt, autodml::render_report_json(report, make_echo(opt), std::nullopt, wald));
  return 0;
}

int report_error(int code, const std::string& kind, const std::string& message) {
  autodml::JsonWriter w;
  w.begin_object();
  w.key("error");
  w.begin_object();
  w.key("code");
  w.value(code);
  w.key("kind");
  w.value(kind);
  w.key("message");
  w.value(message);
  w.end_object();
  w.end_object();
  std::cerr << w.str() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complier-parameter estimation with automatic balancing weights"};
  app.require_subcommand(1);

  Options opt;
  std::string config_path, grid_arg, method_arg, target_arg, trim_arg;
  std::vector<CLI::App*> cmds;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key = value config file");
    cmd->add_option("--data", opt.data_path, "CSV data file");
    cmd->add_option("--target", target_arg, "late | chars | cdf");
    cmd->add_option("--grid", grid_arg, "comma-separated outcome grid");
    cmd->add_option("--method", method_arg, "auto | plugin | kappa");
    cmd->add_option("--folds", opt.folds, "cross-fitting folds");
    cmd->add_option("--trim", trim_arg, "none | trim | censor");
    cmd->add_option("--epsilon", opt.epsilon, "trim/censor threshold");
    cmd->add_option("--alpha", opt.alpha, "band / test level");
    cmd->add_option("--bootstrap-draws", opt.bootstrap_draws, "multiplier bootstrap draws");
    cmd->add_option("--seed", opt.seed, "master seed");
    cmd->add_option("--out", opt.out_path, "output file (default: stdout)");
    cmd->add_option("--threads", opt.threads, "worker thread cap");
    cmds.push_back(cmd);
    return cmd;
  };

  CLI::App* fit = add_common(app.add_subcommand("fit", "estimate complier parameters"));
  CLI::App* simulate = add_common(
      app.add_subcommand("simulate", "Monte-Carlo replication on the benchmark design"));
  simulate->add_option("--design", opt.design, "simulation design name");
  simulate->add_option("--reps", opt.reps, "replications");
  simulate->add_option("--n", opt.n, "sample size per replication");
  simulate->add_option("--lambda-multiplier", opt.lambda_multiplier,
                       "scale on the balancing-weight lambda");
  CLI::App* truth = add_common(app.add_subcommand("truth", "print the benchmark truth table"));
  CLI::App* test_cmd = add_common(
      app.add_subcommand("test-instruments", "Wald test that two instruments agree"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::ostringstream silent;
    app.exit(e, silent, silent);
    return report_error(2, "config", e.what());
  }

  try {
    if (!config_path.empty()) apply_config_file(opt, config_path);
    // command-line flags override file values
    for (CLI::App* cmd : cmds) {
      if (cmd->count("--target")) opt.target = target_arg;
      if (cmd->count("--grid")) opt.grid = parse_grid(grid_arg);
      if (cmd->count("--method")) opt.method = method_arg;
      if (cmd->count("--trim")) opt.trim = trim_arg;
    }
    if (fit->parsed()) return cmd_fit(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (truth->parsed()) return cmd_truth(opt);
    if (test_cmd->parsed()) return cmd_test_instruments(opt);
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    return report_error(2, "config", e.what());
  } catch (const autodml::DataError& e) {
    return report_error(3, "data", e.what());
  } catch (const autodml::EstimationError& e) {
    return report_error(4, "estimation", e.what());
  } catch (const std::exception& e) {
    return report_error(4, "estimation", e.what());
  }
}
