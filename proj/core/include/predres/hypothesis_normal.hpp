// SPDX-License-Identifier: Apache-2.0
//
// Normal-mean tests with known unit variance: the point-vs-point
// demonstration, the two-sided test decided by BIC, and the classical
// p-value / e-value comparators.
#pragma once

#include "predres/engine.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace predres {

/// Sufficient statistics of a unit-variance normal sample.
struct NormalSample
{
    std::size_t count = 0;
    double sum = 0.0;

    static NormalSample from(std::span<const double> values);
    std::size_t size() const noexcept { return count; }
    double mean() const noexcept { return sum / static_cast<double>(count); }
    void add(double x) noexcept
    {
        ++count;
        sum += x;
    }
};

inline constexpr std::size_t kNullHypothesis = 0;
inline constexpr std::size_t kAlternativeHypothesis = 1;

/// Candidates N(theta0, 1) and N(theta1, 1), both with d = 0. Log-likelihoods
/// are reported relative to log L(sample mean), i.e. -m (mean - theta)^2 / 2.
/// The summary statistic is the running mean.
ResamplingProblem<NormalSample, double> point_vs_point_problem(double theta0, double theta1);

ResamplingResult point_vs_point_resample(double theta0, double theta1, std::span<const double> data,
                                         const ResamplingConfig& config);

struct PointSweepEntry
{
    double theta1 = 0.0;
    double p_h1 = 0.0;
    /// theta1 == theta0: the two candidates coincide and p_h1 is the 0.5
    /// reference value instead of a resampling estimate.
    bool baseline = false;
};

std::vector<PointSweepEntry> point_vs_point_sweep(double theta0, std::span<const double> theta1_values,
                                                  std::span<const double> data, const ResamplingConfig& config);

/// H1 iff m * centered_mean^2 > log m, where centered_mean = mean - theta0.
/// For m < 2 the rule is degenerate (log 1 = 0) and H0 is returned.
std::size_t two_sided_decision(std::size_t m, double centered_mean);

/// H0: N(theta0, 1) with d = 0. H1: N(mean, 1) with d = 1. Scored by BIC, so
/// selection reproduces two_sided_decision exactly. Below two observations
/// the alternative reports the null's likelihood and loses the tie.
ResamplingProblem<NormalSample, double> two_sided_problem(double theta0);

ResamplingResult two_sided_resample(double theta0, std::span<const double> data, const ResamplingConfig& config);

/// 2 Phi(-sqrt(n) |mean - theta0|).
double z_test_p_value(double theta0, std::span<const double> data);

/// exp(z delta - delta^2 / 2) with z = sqrt(n) (mean - theta0).
double e_value(std::span<const double> data, double delta, double theta0 = 0.0);

double e_to_p(double e);

struct TwoSidedTestResult
{
    std::uint64_t seed = 0;
    std::size_t n = 0;
    double sample_mean = 0.0;
    double p_value = 1.0;
    double e_value = 0.0;
    double resampling_p_h1 = 0.0;
};

struct TwoSidedStudyConfig
{
    std::vector<std::size_t> sample_sizes{30, 100, 300, 1000};
    /// N = n + multiplier * n.
    std::size_t multiplier = 20;
    std::size_t n_trials = 1000;
    std::uint64_t first_seed = 1;
    std::size_t n_seeds = 100;
    double null_mean = 0.0;
    double alt_mean = 0.1;
    double theta0 = 0.0;
    double delta = 0.1;
    std::size_t workers = 1;
};

struct TwoSidedStudy
{
    TwoSidedStudyConfig config;
    /// Indexed [sample size][seed].
    std::vector<std::vector<TwoSidedTestResult>> null_results;
    std::vector<std::vector<TwoSidedTestResult>> alt_results;
};

/// Observed data for one seed. `truth` is 0 for the null generator, 1 for
/// the alternative.
std::vector<double> simulate_normal_data(std::uint64_t seed, std::size_t truth, std::size_t n, double mean);

TwoSidedTestResult run_two_sided_test(std::uint64_t seed, std::span<const double> data,
                                      const TwoSidedStudyConfig& config, std::vector<TrialTrace>* traces = nullptr);

/// Every (truth, n, seed) cell of the comparison table.
TwoSidedStudy run_two_sided_study(const TwoSidedStudyConfig& config);

struct MetricRow
{
    std::string truth;
    std::string metric;
    std::vector<double> values; // one per sample size
};

/// The ten rows: rejection rates for p < 0.05 and e > 10, mean resampling
/// P(H1), and threshold proportions of P(H1), under each generator.
std::vector<MetricRow> two_sided_metrics(const TwoSidedStudy& study);

/// One step of the likelihood-ratio process for the point-vs-point model.
struct LikelihoodRatioStep
{
    std::size_t m = 0;
    std::size_t model = 0;
    /// Hypothesis maximizing the likelihood of x_{1:m-1} and x_{1:m-2}.
    std::size_t best_previous = 0;
    std::size_t best_before_previous = 0;
    double log_ratio = 0.0;                 // log L_m(k)
    double log_conditional_expectation = 0; // log E[L_m(k) | x_{1:m-1}]
    double log_ratio_previous = 0.0;        // log L_{m-1}(k)
};

/// Simulates one resampling path of `steps` imputations starting from
/// `data` (at least two points) and records, for both hypotheses, L_m(k)
/// normalized by the previous best model together with its closed-form
/// conditional expectation.
std::vector<LikelihoodRatioStep> likelihood_ratio_path(double theta0, double theta1, std::span<const double> data,
                                                       std::size_t steps, RngStream stream);

} // namespace predres
