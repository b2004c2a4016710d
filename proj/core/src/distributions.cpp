// SPDX-License-Identifier: Apache-2.0
#include "predres/distributions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace predres {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

// Lanczos coefficients for g = 7, n = 9 (Godfrey).
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

} // namespace

std::uint64_t splitmix64_next(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += kGoldenGamma);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double RngStream::uniform() noexcept
{
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) noexcept
{
    // Lemire's multiply-shift with rejection of the biased low region.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::standard_normal() noexcept
{
    if (spare_normal_) {
        const double z = *spare_normal_;
        spare_normal_.reset();
        return z;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    return radius * std::cos(angle);
}

RngStream derive_trial_stream(std::uint64_t master_seed, std::uint64_t trial_index) noexcept
{
    std::uint64_t state = master_seed ^ ((trial_index + 1) * kGoldenGamma);
    return RngStream(splitmix64_next(state));
}

void validate(const BetaBinomialParams& params)
{
    if (!(params.a > 0.0) || !(params.b > 0.0)) {
        throw std::domain_error("beta-binomial shapes must be positive");
    }
}

double sample_normal(RngStream& stream, double mean, double sd)
{
    if (!(sd > 0.0)) {
        throw std::domain_error("normal standard deviation must be positive");
    }
    return mean + sd * stream.standard_normal();
}

double sample_gamma(RngStream& stream, double shape)
{
    if (!(shape > 0.0)) {
        throw std::domain_error("gamma shape must be positive");
    }
    if (shape < 1.0) {
        const double boosted = sample_gamma(stream, shape + 1.0);
        return boosted * std::pow(stream.uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = stream.standard_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = stream.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

namespace {

// log of a Gamma(shape) draw, exact in the boost step for shapes below one.
double log_sample_gamma(RngStream& stream, double shape)
{
    if (!(shape > 0.0)) {
        throw std::domain_error("gamma shape must be positive");
    }
    if (shape < 1.0) {
        const double boosted = sample_gamma(stream, shape + 1.0);
        return std::log(boosted) + std::log(stream.uniform()) / shape;
    }
    return std::log(sample_gamma(stream, shape));
}

} // namespace

double sample_beta(RngStream& stream, double a, double b)
{
    // Work with log Gamma draws so tiny shapes do not underflow to 0 / 0.
    const double log_x = log_sample_gamma(stream, a);
    const double log_y = log_sample_gamma(stream, b);
    if (log_x >= log_y) {
        return 1.0 / (1.0 + std::exp(log_y - log_x));
    }
    const double ratio = std::exp(log_x - log_y);
    return ratio / (1.0 + ratio);
}

std::uint64_t sample_binomial(RngStream& stream, std::uint64_t n, double p)
{
    std::uint64_t successes = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        if (stream.uniform() < p) {
            ++successes;
        }
    }
    return successes;
}

std::uint64_t sample_beta_binomial(RngStream& stream, const BetaBinomialParams& params)
{
    validate(params);
    if (params.n_trials == 0) {
        return 0;
    }
    const double p = sample_beta(stream, params.a, params.b);
    return sample_binomial(stream, params.n_trials, p);
}

double bootstrap_draw(RngStream& stream, std::span<const double> values)
{
    if (values.empty()) {
        throw std::domain_error("bootstrap_draw needs at least one value");
    }
    return values[stream.uniform_index(values.size())];
}

double log_gamma(double x)
{
    if (!(x > 0.0)) {
        throw std::domain_error("log_gamma needs a positive argument, got " + std::to_string(x));
    }
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
        return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double series = kLanczos[0];
    for (std::size_t i = 1; i < kLanczos.size(); ++i) {
        series += kLanczos[i] / (z + static_cast<double>(i));
    }
    const double t = z + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(series);
}

namespace {

constexpr double kStirlingThreshold = 10.0;

// log Gamma(x) - [(x - 1/2) log x - x + log(2 pi) / 2] by the Stirling
// series, accurate to double precision for x >= 10.
double stirling_correction(double x)
{
    const double r = 1.0 / x;
    const double r2 = r * r;
    return r * (1.0 / 12.0 +
                r2 * (-1.0 / 360.0 +
                      r2 * (1.0 / 1260.0 +
                            r2 * (-1.0 / 1680.0 + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360360.0 + r2 / 156.0))))));
}

} // namespace

double log_beta(double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("log_beta needs positive arguments");
    }
    // Large arguments cancel badly in a log-gamma difference, so the leading
    // Stirling terms are combined analytically first.
    const double p = std::min(a, b);
    const double q = std::max(a, b);
    const double ratio = p / (p + q);
    if (p >= kStirlingThreshold) {
        const double correction = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        return -0.5 * std::log(q) + 0.5 * std::log(2.0 * std::numbers::pi) + correction +
               (p - 0.5) * std::log(ratio) + q * std::log1p(-ratio);
    }
    if (q >= kStirlingThreshold) {
        const double correction = stirling_correction(q) - stirling_correction(p + q);
        return log_gamma(p) + correction + p - p * std::log(p + q) + (q - 0.5) * std::log1p(-ratio);
    }
    return log_gamma(p) + log_gamma(q) - log_gamma(p + q);
}

double log_binomial_coefficient(std::uint64_t n, std::uint64_t k)
{
    if (k > n) {
        throw std::domain_error("binomial coefficient with k > n");
    }
    if (k == 0 || k == n) {
        return 0.0;
    }
    const auto nd = static_cast<double>(n);
    const auto kd = static_cast<double>(k);
    return log_gamma(nd + 1.0) - log_gamma(kd + 1.0) - log_gamma(nd - kd + 1.0);
}

double log_pmf_beta_binomial(std::uint64_t k, const BetaBinomialParams& params)
{
    validate(params);
    if (k > params.n_trials) {
        throw std::domain_error("beta-binomial outcome exceeds the number of trials");
    }
    const auto kd = static_cast<double>(k);
    const auto rest = static_cast<double>(params.n_trials - k);
    return log_binomial_coefficient(params.n_trials, k) + log_beta(kd + params.a, rest + params.b) -
           log_beta(params.a, params.b);
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double log_normal_density(double x, double mean, double variance)
{
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

} // namespace predres
