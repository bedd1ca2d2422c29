#pragma once

/** @file
 * Exact sampling of Z = sigma n^{-beta} X + Y and Monte Carlo studies of the
 * estimators. Replicate r draws its normals from the streams (seed, r, 0)
 * for X and (seed, r, 1) for Y, so results do not depend on the number of
 * workers.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "scalefisher/error.hpp"
#include "scalefisher/estimator.hpp"
#include "scalefisher/fisher.hpp"
#include "scalefisher/linalg.hpp"
#include "scalefisher/model.hpp"
#include "scalefisher/random.hpp"

namespace scalefisher {

/// Worker count: hardware concurrency, capped by SCALEFISHER_THREADS when set.
inline unsigned default_thread_count() {
  unsigned count = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SCALEFISHER_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) count = std::min<unsigned>(count, static_cast<unsigned>(cap));
  }
  return count;
}

/// Sampler for one spec: X = L xi with L the lower Cholesky factor of Cov(X),
/// Y = B diag(2^K tau sin^K(u_i / 2)) xi' in the DCT basis of the noise.
/// sigma = 0 is allowed and yields pure noise.
class Sampler {
 public:
  explicit Sampler(const ModelSpec& spec) : spec_(spec) {
    spec.validate(true);
    Eigen::LLT<Matrix> llt(covariance_x(spec));
    if (llt.info() != Eigen::Success)
      throw NumericalError("sampler: Cov(X) is not positive definite (Cholesky failed)");
    signal_ = llt.matrixL();
    NoiseDiagonalization noise = dct_diagonalize_noise(spec.n, spec.K, spec.tau, spec.convention);
    noise_basis_ = std::move(noise.basis);
    noise_scale_ = noise.eigenvalues.array().sqrt();
    amplitude_ = spec.sigma * std::sqrt(spec.signal_factor());
  }

  const ModelSpec& spec() const { return spec_; }

  Vector sample(std::uint64_t seed, std::uint64_t replicate) const {
    const auto n = static_cast<Eigen::Index>(spec_.n);
    Vector xi(n);
    Vector eta(n);
    NormalStream(seed, replicate, 0).fill(xi, spec_.n);
    NormalStream(seed, replicate, 1).fill(eta, spec_.n);
    Vector z = noise_basis_ * noise_scale_.cwiseProduct(eta);
    if (amplitude_ != 0.0) {
      const Vector x = signal_.triangularView<Eigen::Lower>() * xi;
      z += amplitude_ * x;
    }
    return z;
  }

 private:
  ModelSpec spec_;
  Matrix signal_;
  Matrix noise_basis_;
  Vector noise_scale_;
  double amplitude_ = 0.0;
};

inline Vector sample_z(const ModelSpec& spec, std::uint64_t seed, std::uint64_t replicate) {
  return Sampler(spec).sample(seed, replicate);
}

enum class EstimatorKind { oracle, efficient };

inline const char* to_string(EstimatorKind k) { return k == EstimatorKind::oracle ? "oracle" : "efficient"; }

/// One replicate of a study. The oracle has no preliminary step.
struct ReplicateEstimate {
  std::uint64_t rep = 0;
  std::optional<double> V;
  std::optional<double> sigma2_tilde;
  double sigma2_hat = 0.0;
  std::optional<double> plugin_fisher;
};

struct McStudy {
  ModelSpec spec;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  EstimatorKind estimator = EstimatorKind::efficient;
  std::vector<ReplicateEstimate> estimates;
  std::optional<SplitPlan> split;  ///< shared by every replicate (efficient only)
  double mean = 0.0;
  double mse = 0.0;       ///< mean of (sigma2_hat - sigma^2)^2
  double variance = 0.0;  ///< unbiased sample variance of sigma2_hat
  double fisher_exact = 0.0;
  double normalized = 0.0;           ///< fisher_exact * mse
  double normalized_variance = 0.0;  ///< fisher_exact * variance
};

/// Runs `reps` replicates on up to `threads` workers and aggregates them in
/// replicate order. `system` and `sampler` must belong to `spec`; passing
/// them in lets several studies share one whitening.
inline McStudy run_study(const ModelSpec& spec, const WhitenedSystem& system, const Sampler& sampler,
                         std::size_t reps, std::uint64_t seed, EstimatorKind estimator,
                         unsigned threads = 1, const EstimateOptions& options = {}) {
  detail::require(reps >= 2, "run_study: reps must be at least 2");
  spec.validate();
  detail::require(system.size() == spec.n && sampler.spec().n == spec.n,
                  "run_study: whitened system or sampler has wrong order");
  McStudy study;
  study.spec = spec;
  study.reps = reps;
  study.seed = seed;
  study.estimator = estimator;
  study.fisher_exact = fisher_exact(spec, system);
  if (estimator == EstimatorKind::efficient)
    study.split = make_split(system.eigenvalues(), spec.n, spec.beta, options.delta);
  const double sigma2 = spec.sigma * spec.sigma;
  const double s = spec.signal_factor();
  study.estimates.resize(reps);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        const Vector z = sampler.sample(seed, r);
        const auto squares = detail::squares_of(system.transform(z));
        ReplicateEstimate rec;
        rec.rep = r;
        if (estimator == EstimatorKind::oracle) {
          rec.sigma2_hat = oracle_from_squares(squares, system.eigenvalues(), sigma2, s);
        } else {
          const EstimateResult e = estimate_from_squares(squares, system.eigenvalues(), *study.split, s);
          rec.V = e.preliminary_V;
          rec.sigma2_tilde = e.sigma2_tilde;
          rec.sigma2_hat = e.sigma2_hat;
          rec.plugin_fisher = e.plugin_fisher;
        }
        study.estimates[r] = rec;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = reps;
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(reps)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  CompensatedSum sum;
  CompensatedSum squared_error;
  for (const auto& e : study.estimates) {
    sum += e.sigma2_hat;
    squared_error += (e.sigma2_hat - sigma2) * (e.sigma2_hat - sigma2);
  }
  const double count_reps = static_cast<double>(reps);
  study.mean = sum.value() / count_reps;
  study.mse = squared_error.value() / count_reps;
  CompensatedSum centered;
  for (const auto& e : study.estimates) centered += (e.sigma2_hat - study.mean) * (e.sigma2_hat - study.mean);
  study.variance = centered.value() / (count_reps - 1.0);
  study.normalized = study.fisher_exact * study.mse;
  study.normalized_variance = study.fisher_exact * study.variance;
  return study;
}

inline McStudy run_study(const ModelSpec& spec, std::size_t reps, std::uint64_t seed,
                         EstimatorKind estimator, unsigned threads = 1,
                         const EstimateOptions& options = {}) {
  detail::require(reps >= 2, "run_study: reps must be at least 2");
  spec.validate();
  const Sampler sampler(spec);
  return run_study(spec, whiten_model(spec, options.route), sampler, reps, seed, estimator, threads,
                   options);
}

}  // namespace scalefisher
