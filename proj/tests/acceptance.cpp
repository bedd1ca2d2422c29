// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is the number of failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "scalefisher/scalefisher.hpp"

using namespace scalefisher;

namespace {

// Criterion 1
constexpr double tol_cH_half = 1e-12;
constexpr double tol_cH_rel = 0.005;
// Criterion 2
constexpr double tol_benchmark = 0.01;
// Criterion 3
constexpr double tol_exact_integral = 0.10;
// Criterion 4
constexpr double tol_closed_routes = 1e-10;
// Criterion 5
constexpr double tol_slope = 0.05;
constexpr double tol_flat = 0.10;
// Criterion 6
constexpr double tol_unbiased = 1e-10;
constexpr double oracle_band_lo = 0.85;
constexpr double oracle_band_hi = 1.15;
// Criterion 7
constexpr double efficient_band_lo = 0.8;
constexpr double efficient_band_hi = 1.5;
// Criterion 8
constexpr double tol_orthonormal = 1e-12;
constexpr double tol_dct_eig = 1e-8;
constexpr double tol_convention = 1e-10;
constexpr double tol_scaling = 1e-10;
constexpr double tol_whitened = 1e-9;

constexpr std::uint64_t seed_oracle = 20240601;
constexpr std::uint64_t seed_efficient = 20240602;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok) { pass = pass && ok; }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Whitened fBM+WN systems (sigma = tau = 1) keyed by (H, n), shared across
// criteria because the dense eigendecomposition dominates the run time.
struct Fitted {
  ModelSpec spec;
  WhitenedSystem system;
  std::unique_ptr<Sampler> sampler;
};

class Cache {
 public:
  const Fitted& get(double H, std::size_t n) {
    const auto key = std::make_pair(H, n);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      const ModelSpec spec = fbm_wn_preset(H, 1.0, 1.0, n);
      auto f = std::make_unique<Fitted>(Fitted{spec, whiten_model(spec), nullptr});
      it = entries_.emplace(key, std::move(f)).first;
    }
    return *it->second;
  }
  const Sampler& sampler(double H, std::size_t n) {
    const Fitted& f = get(H, n);
    auto& slot = entries_.at(std::make_pair(H, n))->sampler;
    if (!slot) slot = std::make_unique<Sampler>(f.spec);
    return *slot;
  }

 private:
  std::map<std::pair<double, std::size_t>, std::unique_ptr<Fitted>> entries_;
};

Outcome criterion1() {
  Outcome o;
  const double half = closed_form_constant_cH(0.5);
  const double q = 1.0 / closed_form_constant_cH(0.25);
  const double t = 1.0 / closed_form_constant_cH(0.75);
  o.require(std::abs(half - 0.125) <= tol_cH_half);
  o.require(std::abs(q / 10.64 - 1.0) <= tol_cH_rel);
  o.require(std::abs(t / 8.12 - 1.0) <= tol_cH_rel);
  o.detail << "c_H(0.5)=" << fmt(half) << " 1/c_H(0.25)=" << fmt(q) << " 1/c_H(0.75)=" << fmt(t);
  return o;
}

Outcome criterion2() {
  Outcome o;
  const double n = 1e8;
  const double I = fisher_integral(fbm_wn_preset(0.5, 1.0, 1.0, static_cast<std::size_t>(n)));
  const double v = std::sqrt(n) / I;
  o.require(std::abs(v / 8.0 - 1.0) <= tol_benchmark);
  o.detail << "n^{1/2}/I=" << fmt(v) << " (target 8, tol " << tol_benchmark * 100 << "%)";
  return o;
}

Outcome criterion3(Cache& cache) {
  Outcome o;
  for (double H : {0.25, 0.5, 0.75}) {
    const Fitted& f = cache.get(H, 2048);
    const double exact = fisher_exact(f.spec, f.system);
    const double integral = fisher_integral(f.spec);
    const double rel = std::abs(exact - integral) / exact;
    o.require(rel <= tol_exact_integral);
    o.detail << "H=" << H << " exact=" << fmt(exact) << " integral=" << fmt(integral) << " rel=" << fmt(rel)
             << "; ";
  }
  return o;
}

Outcome criterion4() {
  Outcome o;
  for (double H : {0.3, 0.6}) {
    const ModelSpec spec = fbm_wn_preset(H, 1.0, 1.0, 1000000);
    const double general = closed_form_subcritical(spec);
    const double specific = closed_form_fbm_wn(spec);
    const double rel = relative_difference(general, specific);
    o.require(rel <= tol_closed_routes);
    o.detail << "H=" << H << " rel=" << fmt(rel) << "; ";
  }
  return o;
}

std::vector<std::size_t> elbow_grid() {
  std::vector<std::size_t> grid;
  for (int i = 0; i < 7; ++i) grid.push_back(static_cast<std::size_t>(std::llround(std::pow(10.0, 5.0 + 0.5 * i))));
  return grid;
}

Outcome criterion5() {
  Outcome o;
  const auto grid = elbow_grid();
  const unsigned threads = default_thread_count();

  const ModelSpec sub = large_error_preset(0.9, 1.0, 1.0, grid.front(), large_error_default_beta(0.9), false);
  const RateScan a = rate_scan(sub, grid, threads);
  const double want_a = 1.0 - 2.5 * sub.beta;
  o.require(std::abs(sub.diamond() - 2.5) < 1e-12 && std::abs(a.fitted_slope - want_a) <= tol_slope);
  o.detail << "H=0.9 slope=" << fmt(a.fitted_slope) << " want " << fmt(want_a) << "; ";

  const ModelSpec super = large_error_preset(0.6, 1.0, 1.0, grid.front(), large_error_default_beta(0.6), false);
  const RateScan b = rate_scan(super, grid, threads);
  const double want_b = 1.0 - 4.0 * super.beta;
  o.require(std::abs(super.diamond() - 10.0) < 1e-9 && std::abs(b.fitted_slope - want_b) <= tol_slope);
  o.detail << "H=0.6 slope=" << fmt(b.fitted_slope) << " want " << fmt(want_b) << "; ";

  const ModelSpec crit = large_error_preset(0.75, 1.0, 1.0, grid.front(), large_error_default_beta(0.75), false);
  const RateScan c = rate_scan(crit, grid, threads);
  double lo = INFINITY;
  double hi = 0.0;
  for (const auto& row : c.rows) {
    const double nn = static_cast<double>(row.n);
    const double v = row.integral * std::pow(nn, 4.0 * crit.beta - 1.0) / std::log(nn);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  o.require(c.regime == Regime::critical && hi / lo - 1.0 <= tol_flat);
  o.detail << "H=0.75 max/min of I n^{4b-1}/log n=" << fmt(hi / lo);
  return o;
}

Outcome criterion6(Cache& cache) {
  Outcome o;
  const Fitted& f = cache.get(0.5, 512);
  const double s = f.spec.signal_factor();
  double worst = 0.0;
  for (double sigma2 : {0.25, 1.0, 4.0}) {
    std::vector<double> w(f.spec.n);
    for (std::size_t i = 0; i < f.spec.n; ++i)
      w[i] = sigma2 * s * f.system.eigenvalues()(static_cast<Eigen::Index>(i)) + 1.0;
    worst = std::max(worst, std::abs(oracle_from_squares(w, f.system.eigenvalues(), sigma2, s) / sigma2 - 1.0));
  }
  o.require(worst <= tol_unbiased);
  const McStudy st =
      run_study(f.spec, f.system, cache.sampler(0.5, 512), 2000, seed_oracle, EstimatorKind::oracle, default_thread_count());
  o.require(st.normalized_variance >= oracle_band_lo && st.normalized_variance <= oracle_band_hi);
  o.detail << "substitution rel err=" << fmt(worst) << " I*Var=" << fmt(st.normalized_variance)
           << " (I*MSE=" << fmt(st.normalized) << ")";
  return o;
}

Outcome criterion7(Cache& cache) {
  Outcome o;
  auto study = [&](double H, std::size_t n) {
    const Fitted& f = cache.get(H, n);
    return run_study(f.spec, f.system, cache.sampler(H, n), 500, seed_efficient, EstimatorKind::efficient,
                     default_thread_count());
  };
  for (double H : {0.3, 0.5, 0.7}) {
    const McStudy st = study(H, 2048);
    const bool ok = st.normalized >= efficient_band_lo && st.normalized <= efficient_band_hi;
    o.require(ok);
    o.detail << "H=" << H << " I*MSE=" << fmt(st.normalized) << (ok ? "" : " (outside band)")
             << " I_A/I=" << fmt(st.split->I1_An / st.fisher_exact) << "; ";
  }
  const double small = study(0.5, 512).normalized;
  const double large = study(0.5, 4096).normalized;
  o.require(std::abs(large - 1.0) < std::abs(small - 1.0));
  o.detail << "H=0.5 trend n=512 " << fmt(small) << " -> n=4096 " << fmt(large);
  return o;
}

Outcome criterion8() {
  Outcome o;
  double ortho = 0.0;
  for (std::size_t n : {64u, 256u}) {
    const DctBasis b = dct_viii(n);
    ortho = std::max(ortho, (b.matrix.transpose() * b.matrix - Matrix::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  o.require(ortho <= tol_orthonormal);

  double eig = 0.0;
  for (int K : {1, 2}) {
    const Vector dense = oracle::dense_eigenvalues_desc(diff_cov(64, K, 1.0, NoiseConvention::deltaT_delta));
    Vector dct = dct_diagonalize_noise(64, K, 1.0, NoiseConvention::deltaT_delta).eigenvalues;
    std::sort(dct.data(), dct.data() + dct.size(), std::greater<>());
    eig = std::max(eig, (dense - dct).cwiseAbs().maxCoeff());
  }
  o.require(eig <= tol_dct_eig);

  const ModelSpec a = fbm_wn_preset(0.3, 1.0, 1.0, 256);
  ModelSpec b = a;
  b.convention = NoiseConvention::deltaT_delta;
  const double conv = relative_difference(fisher_exact(a), fisher_exact(b));
  o.require(conv <= tol_convention);

  const double c = 2.5;
  ModelSpec scaled = a;
  scaled.sigma *= c;
  scaled.tau *= c;
  const double scaling = relative_difference(fisher_exact(scaled), std::pow(c, -4.0) * fisher_exact(a));
  o.require(scaling <= tol_scaling);

  const ModelSpec w = fbm_wn_preset(0.5, 1.0, 1.0, 128);
  const WhitenedSystem sys = whiten_model(w);
  const Matrix t = sys.transform(Matrix(Matrix::Identity(128, 128)));
  Matrix cov = t * covariance_z(w) * t.transpose();
  cov.diagonal() -= ((w.signal_factor() * sys.eigenvalues()).array() + 1.0).matrix();
  const double diag = cov.cwiseAbs().maxCoeff();
  o.require(diag <= tol_whitened);

  o.detail << "orthonormality=" << fmt(ortho) << " dct-eig=" << fmt(eig) << " convention=" << fmt(conv)
           << " scaling=" << fmt(scaling) << " whitened=" << fmt(diag);
  return o;
}

Outcome criterion9(Cache& cache) {
  Outcome o;
  double prev_mass = -INFINITY;
  double prev_ratio = INFINITY;
  for (std::size_t n : {512u, 1024u, 2048u, 4096u}) {
    const Fitted& f = cache.get(0.5, n);
    const SplitPlan plan = make_split(f.system.eigenvalues(), n, f.spec.beta);
    const double ratio = plan.I1_An / plan.I1_n;
    o.require(plan.I1_An > prev_mass && ratio < prev_ratio);
    prev_mass = plan.I1_An;
    prev_ratio = ratio;
    o.detail << "n=" << n << " I1_A=" << fmt(plan.I1_An) << " ratio=" << fmt(ratio) << "; ";
  }
  return o;
}

}  // namespace

int main() {
  Cache cache;
  int failures = 0;
  auto report = [&](int id, const char* name, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("criterion %d [%s] %s: %s (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  };
  report(1, "c_H golden values", [] { return criterion1(); });
  report(2, "H=1/2 benchmark", [] { return criterion2(); });
  report(4, "closed-form routes agree", [] { return criterion4(); });
  report(8, "structural suite", [] { return criterion8(); });
  report(5, "elbow effect", [] { return criterion5(); });
  report(6, "oracle efficiency", [&] { return criterion6(cache); });
  report(3, "exact vs integral", [&] { return criterion3(cache); });
  report(9, "split growth", [&] { return criterion9(cache); });
  report(7, "efficient estimator at desk scale", [&] { return criterion7(cache); });
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
