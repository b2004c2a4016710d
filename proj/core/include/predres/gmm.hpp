// SPDX-License-Identifier: Apache-2.0
//
// Univariate Gaussian mixtures fitted by EM, scored by BIC, and resampled
// to give a posterior over the number of components.
#pragma once

#include "predres/engine.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace predres {

struct GmmModel
{
    std::size_t n_components = 0;
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;
    bool equal_variance = true;
};

/// Free parameters: G means + (G - 1) proportions + 1 common variance = 2G,
/// or 3G - 1 with one variance per component.
std::size_t gmm_dimension(std::size_t n_components, bool equal_variance);

struct EmConfig
{
    std::size_t max_iterations = 500;
    /// Stop once |delta log L| <= tolerance * |log L|.
    double log_likelihood_tolerance = 1e-8;
    std::size_t n_restarts = 5;
    /// Variance floor as a multiple of the sample variance.
    double relative_variance_floor = 1e-3;
    /// Record the log-likelihood at every iteration.
    bool record_trace = false;
    /// Iteration cap for warm-started refits inside a resampling trial. Each
    /// refit resumes from the previous step's parameters.
    std::size_t refit_max_iterations = 5;
};

struct EmFit
{
    GmmModel model;
    double log_likelihood = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// A component weight fell below 1e-8, or the data has no spread.
    bool degenerate = false;
    std::vector<double> log_likelihood_trace;
};

/// Best of `config.n_restarts` EM runs. The first run starts from G evenly
/// spaced sample quantiles with uniform weights and the pooled variance; the
/// others perturb those means by up to half a pooled standard deviation.
/// G = 1 is solved in closed form. Throws std::domain_error if G is zero or
/// exceeds the number of points.
EmFit em_fit(std::span<const double> data, std::size_t n_components, bool equal_variance, const EmConfig& config,
             RngStream& stream);

/// A single EM run from `start` (warm start).
EmFit em_refine(std::span<const double> data, const GmmModel& start, const EmConfig& config);

double gmm_log_likelihood(const GmmModel& model, std::span<const double> data);

/// d log m - 2 log L (lower is better).
double gmm_bic(double log_likelihood, std::size_t n_components, bool equal_variance, std::size_t m);

double gmm_sample(const GmmModel& model, RngStream& stream);

struct MixtureCandidate
{
    std::size_t n_components = 1;
    bool equal_variance = true;
};

/// Every (G, variance mode) pair for G in [1, max_components].
std::vector<MixtureCandidate> mixture_candidates(std::size_t max_components, bool include_equal = true,
                                                 bool include_unequal = true);

/// Working data for a resampling trial. Each candidate's last fit is cached
/// and warm-starts its next fit; a fresh dataset has no cache and the first
/// fit uses full restarts.
struct MixtureData
{
    std::vector<double> values;
    mutable std::vector<std::optional<GmmModel>> warm_start;

    std::size_t size() const noexcept { return values.size(); }
};

/// Candidates fitted by EM and compared by BIC. The selected model id is the
/// component count G, so posteriors and traces are over G directly.
ResamplingProblem<MixtureData, double> density_problem(std::span<const MixtureCandidate> candidates,
                                                       const EmConfig& config);

struct DensityPosterior
{
    std::map<std::size_t, double> probability_by_components;
    ResamplingResult run;

    std::size_t modal_components() const;
    double probability(std::size_t g) const;
};

DensityPosterior density_resample(std::span<const double> data, std::span<const MixtureCandidate> candidates,
                                  const ResamplingConfig& config, const EmConfig& em_config = {});

/// n points from 0.5 N(-1, sigma^2) + 0.5 N(1, sigma^2). Labels and standard
/// normal offsets depend only on the seed, so different sigmas rescale the
/// same draws about their component centers.
std::vector<double> sample_two_component(std::uint64_t seed, std::size_t n, double sigma);

/// n points from 0.4 N(-3, 1) + 0.3 N(0, 1) + 0.3 N(4, 1).
std::vector<double> sample_three_component(std::uint64_t seed, std::size_t n);

/// Galaxy velocities in units of 1000 km/s (82 values).
std::vector<double> galaxies_velocities();

} // namespace predres
