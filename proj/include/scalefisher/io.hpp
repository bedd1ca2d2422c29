#pragma once

/** @file
 * Serialization of reports and studies (JSON objects, CSV with a header
 * row), atomic file output, and the single-column data reader.
 */

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "scalefisher/error.hpp"
#include "scalefisher/estimator.hpp"
#include "scalefisher/fisher.hpp"
#include "scalefisher/model.hpp"
#include "scalefisher/montecarlo.hpp"

namespace scalefisher {

/// File system failure while reading input or writing output.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input data; the message names the offending line.
class InputError : public DomainError {
 public:
  InputError(const std::string& what, std::size_t line) : DomainError(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace io {

using json = nlohmann::json;

/// 17 significant digits, '.' decimal point, independent of the locale.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

inline json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json to_json(const ModelSpec& spec) {
  json x;
  if (spec.x_cov.is_fgn()) {
    x = {{"kind", "fgn"}, {"H", spec.x_cov.hurst()}};
  } else if (spec.x_cov.is_integrated_fbm()) {
    x = {{"kind", "integrated_fbm_increment"}, {"H", spec.x_cov.hurst()}};
  } else {
    x = {{"kind", "user_sequence"},
         {"values", std::get<AutocovarianceSpec::UserSequence>(spec.x_cov.kind).values}};
  }
  x["scale"] = spec.x_cov.scale;
  json ell = {{"kind", spec.ell.kind == SlowlyVaryingSpec::Kind::constant ? "constant" : "log_power"},
              {"c", spec.ell.c}};
  if (spec.ell.kind == SlowlyVaryingSpec::Kind::log_power) ell["rho"] = spec.ell.rho;
  return {{"preset", spec.preset}, {"n", spec.n},         {"beta", spec.beta},
          {"sigma", spec.sigma},   {"tau", spec.tau},     {"K", spec.K},
          {"noise_convention", to_string(spec.convention)},
          {"alpha", spec.alpha},   {"diamond", spec.diamond()},
          {"x_cov", x},            {"ell", ell}};
}

inline json to_json(const FisherReport& r) {
  json j = {{"n", r.n},
            {"exact", optional_json(r.exact)},
            {"integral", optional_json(r.integral)},
            {"closed_form", optional_json(r.closed_form)},
            {"diamond", r.diamond},
            {"regime", to_string(r.regime)},
            {"rate_exponent", r.rate_exponent},
            {"log_factor", r.log_factor},
            {"alpha", r.alpha},
            {"K", r.K},
            {"beta", r.beta},
            {"warnings", r.warnings}};
  if (!r.closed_form_route.empty()) j["closed_form_route"] = r.closed_form_route;
  if (r.critical_integral) j["critical_integral"] = *r.critical_integral;
  return j;
}

inline json to_json(const SplitPlan& p) {
  return {{"k_star", p.k_star},     {"size_A", p.A.size()}, {"size_complement", p.complement.size()},
          {"I1_An", p.I1_An},       {"I1_n", p.I1_n},       {"S_An", p.S_An},
          {"S_n", p.S_n},           {"delta_n", p.delta_n}};
}

inline json to_json(const EstimateResult& e) {
  return {{"preliminary_V", e.preliminary_V},
          {"sigma2_tilde", e.sigma2_tilde},
          {"sigma2_hat", e.sigma2_hat},
          {"plugin_fisher", e.plugin_fisher},
          {"split", to_json(e.split)},
          {"diagnostics",
           {{"n", e.split.n}, {"lambda_max", e.lambda_max}, {"lambda_min", e.lambda_min}}}};
}

inline json to_json(const McStudy& s) {
  json j = {{"model", to_json(s.spec)},
            {"reps", s.reps},
            {"seed", s.seed},
            {"estimator", to_string(s.estimator)},
            {"sigma2", s.spec.sigma * s.spec.sigma},
            {"mean", s.mean},
            {"mse", s.mse},
            {"variance", s.variance},
            {"fisher_exact", s.fisher_exact},
            {"normalized", s.normalized},
            {"normalized_variance", s.normalized_variance}};
  if (s.split) j["split"] = to_json(*s.split);
  return j;
}

inline json to_json(const RateScan& scan) {
  json rows = json::array();
  for (const auto& r : scan.rows)
    rows.push_back({{"n", r.n}, {"integral", r.integral}, {"closed_form", optional_json(r.closed_form)}});
  return {{"rows", rows},
          {"fitted_slope", scan.fitted_slope},
          {"closed_form_slope", optional_json(scan.closed_form_slope)},
          {"expected_slope", scan.expected_slope},
          {"regime", to_string(scan.regime)}};
}

/// Pretty-printed JSON with a trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string fisher_csv(const FisherReport& r) {
  std::ostringstream out;
  out << "n,exact,integral,closed_form,diamond,regime,rate_exponent\n";
  out << r.n << ',' << format_optional(r.exact) << ',' << format_optional(r.integral) << ','
      << format_optional(r.closed_form) << ',' << format_double(r.diamond) << ',' << to_string(r.regime)
      << ',' << format_double(r.rate_exponent) << '\n';
  return out.str();
}

/// One row per grid point; the fitted slopes repeat on every row.
inline std::string rate_scan_csv(const RateScan& scan) {
  std::ostringstream out;
  out << "n,integral,closed_form,fitted_slope,closed_form_slope,expected_slope\n";
  for (const auto& r : scan.rows)
    out << r.n << ',' << format_double(r.integral) << ',' << format_optional(r.closed_form) << ','
        << format_double(scan.fitted_slope) << ',' << format_optional(scan.closed_form_slope) << ','
        << format_double(scan.expected_slope) << '\n';
  return out.str();
}

/// Per-replicate estimates; V and sigma2_tilde are empty for the oracle.
inline std::string replicates_csv(const McStudy& s) {
  std::ostringstream out;
  out << "rep,V,sigma2_tilde,sigma2_hat\n";
  for (const auto& e : s.estimates)
    out << e.rep << ',' << format_optional(e.V) << ',' << format_optional(e.sigma2_tilde) << ','
        << format_double(e.sigma2_hat) << '\n';
  return out.str();
}

inline std::string mc_study_csv(const McStudy& s) {
  std::ostringstream out;
  out << "n,reps,seed,estimator,mean,mse,variance,fisher_exact,normalized,normalized_variance\n";
  out << s.spec.n << ',' << s.reps << ',' << s.seed << ',' << to_string(s.estimator) << ','
      << format_double(s.mean) << ',' << format_double(s.mse) << ',' << format_double(s.variance) << ','
      << format_double(s.fisher_exact) << ',' << format_double(s.normalized) << ','
      << format_double(s.normalized_variance) << '\n';
  return out.str();
}

/// Simulated paths in long form: one row per (rep, i), i = 1..n.
inline std::string samples_csv(const std::vector<Vector>& samples) {
  std::ostringstream out;
  out << "rep,i,z\n";
  for (std::size_t r = 0; r < samples.size(); ++r)
    for (Eigen::Index i = 0; i < samples[r].size(); ++i)
      out << r << ',' << (i + 1) << ',' << format_double(samples[r](i)) << '\n';
  return out.str();
}

/// One value per line, the input format of the estimator.
inline std::string column_text(const Vector& z) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < z.size(); ++i) out << format_double(z(i)) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Writes to a temporary sibling and renames it over `path`, so a reader
/// never sees a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw IoError("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

/// Parses newline-delimited decimal numbers. Blank lines are skipped;
/// anything else that is not a single finite number is an error naming its
/// 1-based line number.
inline std::vector<double> parse_column(std::string_view text) {
  std::vector<double> values;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view token = text.substr(pos, end - pos);
    pos = end + 1;
    const auto first = token.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    token = token.substr(first, token.find_last_not_of(" \t\r") - first + 1);
    const char* begin = token.data();
    if (!token.empty() && token.front() == '+') ++begin;
    double value = 0.0;
    const auto res = std::from_chars(begin, token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size() || !std::isfinite(value))
      throw InputError("line " + std::to_string(line) + ": '" + std::string(token) +
                           "' is not a finite number",
                       line);
    values.push_back(value);
  }
  if (values.empty()) throw InputError("input contains no data", 0);
  return values;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return buf.str();
}

inline std::vector<double> read_column(const std::filesystem::path& path) {
  return parse_column(read_file(path));
}

}  // namespace io
}  // namespace scalefisher
