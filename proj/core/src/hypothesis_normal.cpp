// SPDX-License-Identifier: Apache-2.0
#include "predres/hypothesis_normal.hpp"

#include <cmath>
#include <stdexcept>

namespace predres {

namespace {

// Tags separating the data streams of a seed from its resampling streams.
constexpr std::uint64_t kDataStreamTag = std::uint64_t{1} << 40;
constexpr std::uint64_t kResamplingSeedTag = std::uint64_t{2} << 40;

// m * c^2, shared by the decision rule and the candidate fits so both sides
// of the BIC comparison see the same rounding.
double scaled_square(std::size_t m, double centered_mean)
{
    return static_cast<double>(m) * centered_mean * centered_mean;
}

FittedModel fixed_mean_fit(const NormalSample& sample, double theta, std::size_t dimension)
{
    FittedModel fitted;
    fitted.max_log_likelihood = -0.5 * scaled_square(sample.count, sample.mean() - theta);
    fitted.dimension = dimension;
    fitted.parameter_norm = std::abs(theta);
    fitted.sampler_state = theta;
    return fitted;
}

double draw_unit_normal(const FittedModel& fitted, RngStream& stream)
{
    return sample_normal(stream, std::any_cast<double>(fitted.sampler_state), 1.0);
}

void append_value(NormalSample& sample, double&& x)
{
    sample.add(x);
}

double running_mean(const NormalSample& sample, const FittedModel&)
{
    return sample.mean();
}

void require_nonempty(std::span<const double> data)
{
    if (data.empty()) {
        throw std::invalid_argument("normal-mean test needs at least one observation");
    }
}

// sum_{i <= count} log N(x_i | a, 1) - log N(x_i | b, 1) from sufficient statistics.
double log_likelihood_ratio(double a, double b, const NormalSample& sample)
{
    return (a - b) * (sample.sum - 0.5 * static_cast<double>(sample.count) * (a + b));
}

std::size_t best_point_hypothesis(double theta0, double theta1, const NormalSample& sample)
{
    return log_likelihood_ratio(theta1, theta0, sample) > 0.0 ? kAlternativeHypothesis : kNullHypothesis;
}

} // namespace

NormalSample NormalSample::from(std::span<const double> values)
{
    NormalSample sample;
    for (double x : values) {
        sample.add(x);
    }
    return sample;
}

ResamplingProblem<NormalSample, double> point_vs_point_problem(double theta0, double theta1)
{
    ResamplingProblem<NormalSample, double> problem;
    const double thetas[2] = {theta0, theta1};
    for (std::size_t k = 0; k < 2; ++k) {
        const double theta = thetas[k];
        problem.models.push_back({
            .label = k == 0 ? "H0" : "H1",
            .fit = [theta](const NormalSample& sample) { return fixed_mean_fit(sample, theta, 0); },
            .sample_next = draw_unit_normal,
        });
    }
    problem.criterion = Criterion::log_likelihood();
    problem.append = append_value;
    problem.summary = running_mean;
    return problem;
}

ResamplingResult point_vs_point_resample(double theta0, double theta1, std::span<const double> data,
                                         const ResamplingConfig& config)
{
    require_nonempty(data);
    return run_resampling(point_vs_point_problem(theta0, theta1), NormalSample::from(data), config);
}

std::vector<PointSweepEntry> point_vs_point_sweep(double theta0, std::span<const double> theta1_values,
                                                  std::span<const double> data, const ResamplingConfig& config)
{
    std::vector<PointSweepEntry> sweep;
    sweep.reserve(theta1_values.size());
    for (const double theta1 : theta1_values) {
        if (theta1 == theta0) {
            sweep.push_back({theta1, 0.5, true});
            continue;
        }
        const ResamplingResult result = point_vs_point_resample(theta0, theta1, data, config);
        sweep.push_back({theta1, result.posterior.probability(kAlternativeHypothesis), false});
    }
    return sweep;
}

std::size_t two_sided_decision(std::size_t m, double centered_mean)
{
    if (m < 2) {
        return kNullHypothesis;
    }
    return scaled_square(m, centered_mean) > std::log(static_cast<double>(m)) ? kAlternativeHypothesis
                                                                              : kNullHypothesis;
}

ResamplingProblem<NormalSample, double> two_sided_problem(double theta0)
{
    ResamplingProblem<NormalSample, double> problem;
    problem.models.push_back({
        .label = "H0",
        .fit = [theta0](const NormalSample& sample) { return fixed_mean_fit(sample, theta0, 0); },
        .sample_next = draw_unit_normal,
    });
    problem.models.push_back({
        .label = "H1",
        .fit =
            [theta0](const NormalSample& sample) {
                FittedModel fitted;
                fitted.dimension = 1;
                const double ybar = sample.mean();
                fitted.parameter_norm = std::abs(ybar);
                fitted.sampler_state = ybar;
                fitted.max_log_likelihood =
                    sample.count < 2 ? -0.5 * scaled_square(sample.count, ybar - theta0) : 0.0;
                return fitted;
            },
        .sample_next = draw_unit_normal,
    });
    problem.criterion = Criterion::bic();
    problem.append = append_value;
    problem.summary = running_mean;
    return problem;
}

ResamplingResult two_sided_resample(double theta0, std::span<const double> data, const ResamplingConfig& config)
{
    require_nonempty(data);
    return run_resampling(two_sided_problem(theta0), NormalSample::from(data), config);
}

double z_test_p_value(double theta0, std::span<const double> data)
{
    require_nonempty(data);
    const NormalSample sample = NormalSample::from(data);
    const double z = std::sqrt(static_cast<double>(sample.count)) * std::abs(sample.mean() - theta0);
    return 2.0 * normal_cdf(-z);
}

double e_value(std::span<const double> data, double delta, double theta0)
{
    require_nonempty(data);
    const NormalSample sample = NormalSample::from(data);
    const double z = std::sqrt(static_cast<double>(sample.count)) * (sample.mean() - theta0);
    return std::exp(z * delta - 0.5 * delta * delta);
}

double e_to_p(double e)
{
    if (!(e > 0.0)) {
        throw std::domain_error("e-values are positive");
    }
    return std::min(1.0, 1.0 / e);
}

std::vector<double> simulate_normal_data(std::uint64_t seed, std::size_t truth, std::size_t n, double mean)
{
    RngStream stream = derive_trial_stream(seed, kDataStreamTag + truth);
    std::vector<double> data(n);
    for (double& x : data) {
        x = sample_normal(stream, mean, 1.0);
    }
    return data;
}

TwoSidedTestResult run_two_sided_test(std::uint64_t seed, std::span<const double> data,
                                      const TwoSidedStudyConfig& config, std::vector<TrialTrace>* traces)
{
    require_nonempty(data);
    const NormalSample sample = NormalSample::from(data);
    TwoSidedTestResult result;
    result.seed = seed;
    result.n = sample.count;
    result.sample_mean = sample.mean();
    result.p_value = z_test_p_value(config.theta0, data);
    result.e_value = e_value(data, config.delta, config.theta0);

    ResamplingConfig resampling;
    resampling.n_observed = sample.count;
    resampling.n_final = sample.count + config.multiplier * sample.count;
    resampling.n_trials = config.n_trials;
    resampling.master_seed = derive_trial_stream(seed, kResamplingSeedTag + sample.count).next_u64();
    ResamplingResult run = run_resampling(two_sided_problem(config.theta0), sample, resampling);
    result.resampling_p_h1 = run.posterior.probability(kAlternativeHypothesis);
    if (traces != nullptr) {
        *traces = std::move(run.traces);
    }
    return result;
}

TwoSidedStudy run_two_sided_study(const TwoSidedStudyConfig& config)
{
    TwoSidedStudy study;
    study.config = config;
    const std::size_t sizes = config.sample_sizes.size();
    study.null_results.assign(sizes, std::vector<TwoSidedTestResult>(config.n_seeds));
    study.alt_results.assign(sizes, std::vector<TwoSidedTestResult>(config.n_seeds));

    // Unit of work: one (truth, sample size, seed) cell.
    const std::size_t cells = 2 * sizes * config.n_seeds;
    parallel_for(cells, config.workers, [&](std::size_t cell) {
        const std::size_t truth = cell / (sizes * config.n_seeds);
        const std::size_t size_index = (cell / config.n_seeds) % sizes;
        const std::size_t seed_index = cell % config.n_seeds;
        const std::uint64_t seed = config.first_seed + seed_index;
        const double mean = truth == 0 ? config.null_mean : config.alt_mean;
        const std::vector<double> data =
            simulate_normal_data(seed, truth, config.sample_sizes[size_index], mean);
        auto& slot = truth == 0 ? study.null_results : study.alt_results;
        slot[size_index][seed_index] = run_two_sided_test(seed, data, config);
    });
    return study;
}

std::vector<MetricRow> two_sided_metrics(const TwoSidedStudy& study)
{
    constexpr double kAlpha = 0.05;
    constexpr double kEThreshold = 10.0;
    auto row = [&](std::string truth, std::string metric, bool null_block, auto&& statistic) {
        MetricRow out{std::move(truth), std::move(metric), {}};
        const auto& block = null_block ? study.null_results : study.alt_results;
        for (const auto& cells : block) {
            double total = 0.0;
            for (const TwoSidedTestResult& cell : cells) {
                total += statistic(cell);
            }
            out.values.push_back(cells.empty() ? 0.0 : total / static_cast<double>(cells.size()));
        }
        return out;
    };
    auto indicator = [](bool flag) { return flag ? 1.0 : 0.0; };

    return {
        row("H0", "prop_p_below_0.05", true, [&](const auto& c) { return indicator(c.p_value < kAlpha); }),
        row("H0", "prop_e_above_10", true, [&](const auto& c) { return indicator(c.e_value > kEThreshold); }),
        row("H0", "mean_resampling_p_h1", true, [](const auto& c) { return c.resampling_p_h1; }),
        row("H0", "prop_p_h1_above_0.05", true, [&](const auto& c) { return indicator(c.resampling_p_h1 > 0.05); }),
        row("H0", "prop_p_h1_above_0.1", true, [&](const auto& c) { return indicator(c.resampling_p_h1 > 0.1); }),
        row("H1", "prop_p_below_0.05", false, [&](const auto& c) { return indicator(c.p_value < kAlpha); }),
        row("H1", "prop_e_above_10", false, [&](const auto& c) { return indicator(c.e_value > kEThreshold); }),
        row("H1", "mean_resampling_p_h1", false, [](const auto& c) { return c.resampling_p_h1; }),
        row("H1", "prop_p_h1_above_0.5", false, [&](const auto& c) { return indicator(c.resampling_p_h1 > 0.5); }),
        row("H1", "prop_p_h1_above_0.9", false, [&](const auto& c) { return indicator(c.resampling_p_h1 > 0.9); }),
    };
}

std::vector<LikelihoodRatioStep> likelihood_ratio_path(double theta0, double theta1, std::span<const double> data,
                                                       std::size_t steps, RngStream stream)
{
    if (data.size() < 2) {
        throw std::invalid_argument("likelihood_ratio_path needs at least two observations");
    }
    const double thetas[2] = {theta0, theta1};

    NormalSample before_previous = NormalSample::from(data.first(data.size() - 1));
    NormalSample previous = NormalSample::from(data);
    std::vector<LikelihoodRatioStep> path;
    path.reserve(2 * steps);
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t best_prev = best_point_hypothesis(theta0, theta1, previous);
        const std::size_t best_bp = best_point_hypothesis(theta0, theta1, before_previous);
        const double x = sample_normal(stream, thetas[best_prev], 1.0);
        NormalSample current = previous;
        current.add(x);
        for (std::size_t k = 0; k < 2; ++k) {
            LikelihoodRatioStep step;
            step.m = current.count;
            step.model = k;
            step.best_previous = best_prev;
            step.best_before_previous = best_bp;
            step.log_ratio = log_likelihood_ratio(thetas[k], thetas[best_prev], current);
            step.log_conditional_expectation = log_likelihood_ratio(thetas[k], thetas[best_prev], previous);
            step.log_ratio_previous = log_likelihood_ratio(thetas[k], thetas[best_bp], previous);
            path.push_back(step);
        }
        before_previous = previous;
        previous = current;
    }
    return path;
}

} // namespace predres
