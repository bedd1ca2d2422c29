#pragma once

// Command-line front end. run() is kept separate from main() so the tests
// can drive it with argument vectors and captured streams.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid arguments or input,
// 3 numerical failure, 4 file system failure.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scalefisher/scalefisher.hpp"

namespace scalefisher::cli {

enum ExitCode : int { ok = 0, failure = 1, invalid = 2, numerical = 3, io_failure = 4 };

/// Largest n for which the dense exact information is computed.
inline constexpr std::size_t max_exact_n = 8192;

struct ModelOptions {
  std::string preset = "fbm-wn";
  std::optional<double> H;
  double sigma = 1.0;
  double tau = 1.0;
  std::optional<double> beta;
  std::optional<int> K;
  std::optional<double> n;  ///< default 1024, or the data length for estimate
  std::optional<double> alpha;
  std::optional<double> ell;
  std::optional<double> rho;
  std::optional<std::string> convention;
  std::vector<double> gamma;
  bool normalize = false;
  std::string route = "auto";
};

struct RunConfig {
  ModelOptions model;
  std::string method = "all";
  std::string n_grid;
  std::uint64_t seed = 0;
  std::optional<long long> reps;
  std::string input;
  std::string output;
  std::string format;
  std::string estimator = "efficient";
  std::string per_rep_csv;
  std::optional<double> delta;
  double rel_tol = 1e-6;
};

inline std::size_t parse_count(double value, const std::string& what) {
  detail::require(std::isfinite(value) && value >= 1.0 && value == std::floor(value) && value < 1e15,
                  what + " must be a positive integer");
  return static_cast<std::size_t>(value);
}

inline NoiseConvention parse_convention(const std::string& s) {
  if (s == "delta_deltaT") return NoiseConvention::delta_deltaT;
  if (s == "deltaT_delta") return NoiseConvention::deltaT_delta;
  throw DomainError("--convention must be delta_deltaT or deltaT_delta");
}

inline WhitenRoute parse_route(const std::string& s) {
  if (s == "auto") return WhitenRoute::automatic;
  if (s == "cholesky") return WhitenRoute::cholesky;
  if (s == "noise-dct") return WhitenRoute::noise_dct;
  throw DomainError("--route must be auto, cholesky or noise-dct");
}

/// Builds and validates the model. Preset parameters that a preset fixes
/// cannot be overridden.
inline ModelSpec build_spec(const ModelOptions& o, std::size_t n) {
  auto forbid = [&](bool given, const char* flag) {
    detail::require(!given, std::string(flag) + " is not accepted by preset " + o.preset);
  };
  ModelSpec spec;
  if (o.preset == "fbm-wn" || o.preset == "integrated-fbm") {
    forbid(o.beta.has_value(), "--beta");
    forbid(o.K.has_value(), "--K");
    forbid(o.alpha.has_value(), "--alpha");
    forbid(o.ell.has_value(), "--ell");
    forbid(o.rho.has_value(), "--rho");
    forbid(!o.gamma.empty(), "--gamma");
    forbid(o.normalize, "--normalize");
    spec = o.preset == "fbm-wn" ? fbm_wn_preset(o.H.value_or(0.5), o.sigma, o.tau, n)
                                : integrated_fbm_preset(o.H.value_or(0.1), o.sigma, o.tau, n);
  } else if (o.preset == "large-error") {
    forbid(o.K.has_value(), "--K");
    forbid(o.alpha.has_value(), "--alpha");
    forbid(o.ell.has_value(), "--ell");
    forbid(o.rho.has_value(), "--rho");
    forbid(!o.gamma.empty(), "--gamma");
    const double h = o.H.value_or(0.75);
    detail::require(h > 0.5 && h < 1.0, "large-error: H must lie in (1/2,1)");
    spec = large_error_preset(h, o.sigma, o.tau, n, o.beta.value_or(large_error_default_beta(h)),
                              o.normalize);
  } else if (o.preset == "user") {
    forbid(o.normalize, "--normalize");
    spec.preset = "user";
    spec.n = n;
    spec.sigma = o.sigma;
    spec.tau = o.tau;
    spec.K = o.K.value_or(1);
    if (o.gamma.empty()) {
      const double h = o.H.value_or(0.5);
      spec.x_cov = AutocovarianceSpec::fgn(h);
      spec.alpha = o.alpha.value_or(0.5 - h);
      const double c = o.ell.value_or(h * std::abs(2.0 * h - 1.0));
      spec.ell = o.rho ? SlowlyVaryingSpec::log_power(c, *o.rho) : SlowlyVaryingSpec::constant(c);
      spec.beta = o.beta.value_or(h);
    } else {
      forbid(o.H.has_value(), "--H together with --gamma");
      detail::require(o.alpha.has_value(), "--gamma needs --alpha");
      detail::require(o.beta.has_value(), "--gamma needs --beta");
      spec.x_cov = AutocovarianceSpec::user_sequence(o.gamma);
      spec.alpha = *o.alpha;
      const double c = o.ell.value_or(1.0);
      spec.ell = o.rho ? SlowlyVaryingSpec::log_power(c, *o.rho) : SlowlyVaryingSpec::constant(c);
      spec.beta = *o.beta;
    }
  } else {
    throw DomainError("unknown preset '" + o.preset + "'");
  }
  if (o.convention) spec.convention = parse_convention(*o.convention);
  spec.validate();
  return spec;
}

/// "a:b:logsteps=k" gives k log-spaced sizes from a to b inclusive, rounded
/// to integers; otherwise a comma-separated list.
inline std::vector<std::size_t> parse_n_grid(const std::string& text) {
  auto number = [](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    detail::require(!s.empty() && end == s.c_str() + s.size(), "--n-grid: '" + s + "' is not a number");
    return v;
  };
  std::vector<std::size_t> grid;
  const auto first = text.find(':');
  if (first != std::string::npos) {
    const auto second = text.find(':', first + 1);
    detail::require(second != std::string::npos, "--n-grid: expected a:b:logsteps=k");
    const std::string steps = text.substr(second + 1);
    detail::require(steps.rfind("logsteps=", 0) == 0, "--n-grid: expected logsteps=k after the range");
    const double a = number(text.substr(0, first));
    const double b = number(text.substr(first + 1, second - first - 1));
    const double k = number(steps.substr(9));
    detail::require(a >= 1.0 && b > a, "--n-grid: need 1 <= a < b");
    const std::size_t count = parse_count(k, "--n-grid logsteps");
    detail::require(count >= 2, "--n-grid: logsteps must be at least 2");
    for (std::size_t i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(count - 1);
      grid.push_back(static_cast<std::size_t>(std::llround(std::exp((1.0 - t) * std::log(a) + t * std::log(b)))));
    }
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto comma = text.find(',', pos);
      const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      grid.push_back(parse_count(number(item), "--n-grid entry"));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  for (std::size_t i = 1; i < grid.size(); ++i)
    detail::require(grid[i] > grid[i - 1], "--n-grid: sizes must be strictly increasing");
  detail::require(grid.size() >= 2, "--n-grid: need at least two sizes");
  return grid;
}

inline void emit(const RunConfig& c, const std::string& content, std::ostream& out) {
  if (c.output.empty())
    out << content;
  else
    io::write_atomic(c.output, content);
}

inline std::string resolve_format(const RunConfig& c, const std::string& fallback,
                                  std::initializer_list<const char*> allowed) {
  const std::string f = c.format.empty() ? fallback : c.format;
  for (const char* a : allowed)
    if (f == a) return f;
  throw DomainError("--format '" + f + "' is not supported by this command");
}

inline void cmd_fisher(const RunConfig& c, std::ostream& out) {
  const ModelSpec spec = build_spec(c.model, parse_count(c.model.n.value_or(1024), "--n"));
  const std::string format = resolve_format(c, "json", {"json", "csv"});
  ReportMethods methods;
  const bool all = c.method == "all";
  if (c.method == "exact" || all) methods.exact = true;
  if (c.method == "integral" || all) methods.integral = true;
  if (c.method == "closed-form" || all) methods.closed_form = true;
  detail::require(methods.exact || methods.integral || methods.closed_form,
                  "--method must be exact, integral, closed-form or all");
  bool skipped_exact = false;
  if (methods.exact && spec.n > max_exact_n) {
    detail::require(all, "--method exact needs n <= " + std::to_string(max_exact_n));
    methods.exact = false;
    skipped_exact = true;
  }
  ExactOptions exact_options;
  exact_options.route = parse_route(c.model.route);
  IntegralOptions integral_options;
  integral_options.rel_tol = c.rel_tol;
  FisherReport report = fisher_report(spec, methods, exact_options, integral_options);
  if (skipped_exact)
    report.warnings.push_back("exact information skipped: n exceeds " + std::to_string(max_exact_n));

  io::json rel = io::json::object();
  auto pair = [&](const char* name, const std::optional<double>& a, const std::optional<double>& b) {
    rel[name] = a && b ? io::json(relative_difference(*a, *b)) : io::json(nullptr);
  };
  pair("exact_integral", report.exact, report.integral);
  pair("exact_closed_form", report.exact, report.closed_form);
  pair("integral_closed_form", report.integral, report.closed_form);

  if (format == "csv") {
    std::string text = io::fisher_csv(report);
    // Append the relative differences as extra columns of the single row.
    const auto header_end = text.find('\n');
    std::string header = text.substr(0, header_end) + ",rel_exact_integral,rel_exact_closed_form,rel_integral_closed_form";
    std::string row = text.substr(header_end + 1);
    row.pop_back();
    for (const char* k : {"exact_integral", "exact_closed_form", "integral_closed_form"})
      row += "," + (rel[k].is_null() ? std::string() : io::format_double(rel[k].get<double>()));
    emit(c, header + "\n" + row + "\n", out);
    return;
  }
  io::json j = io::to_json(report);
  if (all) j["relative_differences"] = rel;
  j["model"] = io::to_json(spec);
  emit(c, io::dump(j), out);
}

inline void cmd_estimate(const RunConfig& c, std::ostream& out) {
  detail::require(!c.input.empty(), "estimate needs --input");
  const std::string format = resolve_format(c, "json", {"json", "csv"});
  const std::vector<double> data = io::read_column(c.input);
  // n defaults to the number of observations in the file.
  const ModelSpec spec =
      build_spec(c.model, parse_count(c.model.n.value_or(static_cast<double>(data.size())), "--n"));
  detail::require(data.size() == spec.n, "input has " + std::to_string(data.size()) +
                                             " observations but n = " + std::to_string(spec.n));
  const Vector z = Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
  EstimateOptions options;
  options.delta = c.delta;
  options.route = parse_route(c.model.route);
  const EstimateResult r = estimate(z, spec, options);
  if (format == "csv") {
    std::string text = "n,k_star,preliminary_V,sigma2_tilde,sigma2_hat,plugin_fisher,delta_n,I1_An,I1_n\n";
    text += std::to_string(spec.n) + "," + std::to_string(r.split.k_star) + "," + io::format_double(r.preliminary_V) +
            "," + io::format_double(r.sigma2_tilde) + "," + io::format_double(r.sigma2_hat) + "," +
            io::format_double(r.plugin_fisher) + "," + io::format_double(r.split.delta_n) + "," +
            io::format_double(r.split.I1_An) + "," + io::format_double(r.split.I1_n) + "\n";
    emit(c, text, out);
    return;
  }
  io::json j = io::to_json(r);
  j["model"] = io::to_json(spec);
  emit(c, io::dump(j), out);
}

inline void cmd_simulate(const RunConfig& c, std::ostream& out) {
  const ModelSpec spec = build_spec(c.model, parse_count(c.model.n.value_or(1024), "--n"));
  const std::string format = resolve_format(c, "csv", {"csv", "txt"});
  const long long reps = c.reps.value_or(1);
  detail::require(reps >= 1, "--reps must be at least 1");
  detail::require(format == "csv" || reps == 1, "--format txt writes a single path; use --reps 1");
  const Sampler sampler(spec);
  std::vector<Vector> paths;
  for (long long r = 0; r < reps; ++r) paths.push_back(sampler.sample(c.seed, static_cast<std::uint64_t>(r)));
  emit(c, format == "txt" ? io::column_text(paths.front()) : io::samples_csv(paths), out);
}

inline void cmd_mc_study(const RunConfig& c, std::ostream& out) {
  const long long reps = c.reps.value_or(200);
  detail::require(reps >= 2, "--reps must be at least 2");
  const ModelSpec spec = build_spec(c.model, parse_count(c.model.n.value_or(1024), "--n"));
  const std::string format = resolve_format(c, "json", {"json", "csv"});
  detail::require(c.estimator == "oracle" || c.estimator == "efficient", "--estimator must be oracle or efficient");
  EstimateOptions options;
  options.delta = c.delta;
  options.route = parse_route(c.model.route);
  const McStudy study =
      run_study(spec, static_cast<std::size_t>(reps), c.seed,
                c.estimator == "oracle" ? EstimatorKind::oracle : EstimatorKind::efficient,
                default_thread_count(), options);
  if (!c.per_rep_csv.empty()) io::write_atomic(c.per_rep_csv, io::replicates_csv(study));
  emit(c, format == "csv" ? io::mc_study_csv(study) : io::dump(io::to_json(study)), out);
}

inline void cmd_rate_scan(const RunConfig& c, std::ostream& out) {
  detail::require(!c.n_grid.empty(), "rate-scan needs --n-grid");
  const auto grid = parse_n_grid(c.n_grid);
  const ModelSpec templ = build_spec(c.model, grid.front());
  const std::string format = resolve_format(c, "csv", {"json", "csv"});
  IntegralOptions options;
  options.rel_tol = c.rel_tol;
  const RateScan scan = rate_scan(templ, grid, default_thread_count(), options);
  if (format == "csv") {
    emit(c, io::rate_scan_csv(scan), out);
    return;
  }
  io::json j = io::to_json(scan);
  j["model"] = io::to_json(templ);
  emit(c, io::dump(j), out);
}

inline void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--preset", m.preset, "fbm-wn, large-error, integrated-fbm or user")
      ->check(CLI::IsMember({"fbm-wn", "large-error", "integrated-fbm", "user"}));
  app->add_option("--H", m.H, "Hurst index");
  app->add_option("--sigma", m.sigma, "signal scale sigma");
  app->add_option("--tau", m.tau, "noise level tau");
  app->add_option("--beta", m.beta, "scale exponent beta");
  app->add_option("--K", m.K, "difference order of the noise");
  app->add_option("--n", m.n, "sample size");
  app->add_option("--alpha", m.alpha, "long-memory index alpha");
  app->add_option("--ell", m.ell, "constant c of the slowly varying factor");
  app->add_option("--rho", m.rho, "log exponent: l(x) = c |log x|^rho");
  app->add_option("--convention", m.convention, "delta_deltaT or deltaT_delta");
  app->add_option("--gamma", m.gamma, "user autocovariances gamma_0 gamma_1 ...")->delimiter(',');
  app->add_flag("--normalize", m.normalize, "large-error: scale X to sum gamma_k^2 = 1");
  app->add_option("--route", m.route, "whitening: auto, cholesky or noise-dct");
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fisher information and efficient estimation of sigma^2 in Z = sigma n^-beta X + Y",
               "scalefisher"};
  app.require_subcommand(1);
  RunConfig c;

  auto* fisher = app.add_subcommand("fisher", "exact, integral and closed-form Fisher information");
  add_model_options(fisher, c.model);
  fisher->add_option("--method", c.method, "exact, integral, closed-form or all")
      ->check(CLI::IsMember({"exact", "integral", "closed-form", "all"}));
  fisher->add_option("--rel-tol", c.rel_tol, "relative tolerance of the integral");

  auto* est = app.add_subcommand("estimate", "estimate sigma^2 from a data file");
  add_model_options(est, c.model);
  est->add_option("--input", c.input, "one observation per line")->required();
  est->add_option("--delta", c.delta, "truncation level in (0,1]");

  auto* sim = app.add_subcommand("simulate", "draw samples of Z");
  add_model_options(sim, c.model);
  sim->add_option("--seed", c.seed, "64-bit seed");
  sim->add_option("--reps", c.reps, "number of paths");

  auto* mc = app.add_subcommand("mc-study", "Monte Carlo study of an estimator");
  add_model_options(mc, c.model);
  mc->add_option("--seed", c.seed, "64-bit seed");
  mc->add_option("--reps", c.reps, "number of replicates (>= 2)");
  mc->add_option("--estimator", c.estimator, "oracle or efficient");
  mc->add_option("--delta", c.delta, "truncation level in (0,1]");
  mc->add_option("--per-rep-csv", c.per_rep_csv, "also write per-replicate estimates");

  auto* scan = app.add_subcommand("rate-scan", "integral information over a grid of n");
  add_model_options(scan, c.model);
  scan->add_option("--n-grid", c.n_grid, "a:b:logsteps=k or n1,n2,...")->required();
  scan->add_option("--rel-tol", c.rel_tol, "relative tolerance of the integral");

  for (auto* sub : {fisher, est, sim, mc, scan}) {
    sub->add_option("--output", c.output, "output file (default: standard output)");
    sub->add_option("--format", c.format, "json, csv (or txt for simulate)");
  }

  std::vector<std::string> argv_storage{"scalefisher"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return invalid;
  }

  try {
    if (*fisher) cmd_fisher(c, out);
    else if (*est) cmd_estimate(c, out);
    else if (*sim) cmd_simulate(c, out);
    else if (*mc) cmd_mc_study(c, out);
    else cmd_rate_scan(c, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return io_failure;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return invalid;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return failure;
  }
  return ok;
}

}  // namespace scalefisher::cli
