// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random streams and the probability kernels used by the
// resampling experiments.
#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace predres {

/// One step of the SplitMix64 generator: advances `state` and returns the
/// mixed output.
std::uint64_t splitmix64_next(std::uint64_t& state) noexcept;

/// Random stream with a single 64-bit SplitMix64 state.
///
/// Normals are produced by Box-Muller in pairs. The first call after a fresh
/// pair consumes two uniforms and returns the cosine branch; the following
/// call returns the cached sine branch without touching the generator. Two
/// streams with equal state (including the cached branch) produce identical
/// output on every platform.
class RngStream
{
  public:
    explicit RngStream(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept { return splitmix64_next(state_); }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform() noexcept;

    /// Uniform integer in [0, bound). `bound` must be positive.
    std::uint64_t uniform_index(std::uint64_t bound) noexcept;

    double standard_normal() noexcept;

    std::uint64_t state() const noexcept { return state_; }

    friend bool operator==(const RngStream&, const RngStream&) = default;

  private:
    std::uint64_t state_;
    std::optional<double> spare_normal_;
};

/// Stream for trial `trial_index` of a run seeded with `master_seed`.
/// The seed is SplitMix64 applied to
/// `master_seed ^ ((trial_index + 1) * 0x9E3779B97F4A7C15)`.
RngStream derive_trial_stream(std::uint64_t master_seed, std::uint64_t trial_index) noexcept;

struct BetaBinomialParams
{
    std::uint64_t n_trials = 0;
    double a = 1.0;
    double b = 1.0;
};

/// Throws std::domain_error unless a > 0 and b > 0.
void validate(const BetaBinomialParams& params);

double sample_normal(RngStream& stream, double mean, double sd);

/// Marsaglia-Tsang squeeze; shapes below one use the
/// Gamma(shape + 1) * U^(1/shape) boost.
double sample_gamma(RngStream& stream, double shape);

/// Two-Gamma ratio X / (X + Y).
double sample_beta(RngStream& stream, double a, double b);

/// Sum of `n` Bernoulli(p) draws.
std::uint64_t sample_binomial(RngStream& stream, std::uint64_t n, double p);

std::uint64_t sample_beta_binomial(RngStream& stream, const BetaBinomialParams& params);

double bootstrap_draw(RngStream& stream, std::span<const double> values);

/// Lanczos approximation (g = 7, nine coefficients), reflection below 1/2.
double log_gamma(double x);

double log_beta(double a, double b);

double log_binomial_coefficient(std::uint64_t n, std::uint64_t k);

double log_pmf_beta_binomial(std::uint64_t k, const BetaBinomialParams& params);

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// log N(x | mean, variance).
double log_normal_density(double x, double mean, double variance);

} // namespace predres
