// SPDX-License-Identifier: Apache-2.0
#include "predres/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace predres {

namespace {

constexpr double kDegenerateWeight = 1e-8;
constexpr double kLogTwoPi = 1.8378770664093454836;
// exp(-36) < 2.3e-16: below double resolution next to the leading term of 1.
constexpr double kNegligibleLogRatio = -36.0;

struct SampleMoments
{
    double mean = 0.0;
    double variance = 0.0; // MLE (divides by n)
};

SampleMoments moments(std::span<const double> data)
{
    SampleMoments out;
    const auto n = static_cast<double>(data.size());
    out.mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    if (*lo == *hi) {
        // Rounding in the mean would otherwise leave a tiny positive variance.
        out.mean = *lo;
        return out;
    }
    double ss = 0.0;
    for (double x : data) {
        ss += (x - out.mean) * (x - out.mean);
    }
    out.variance = ss / n;
    return out;
}

double variance_floor(const SampleMoments& m, const EmConfig& config)
{
    const double scale = m.variance > 0.0 ? m.variance : 1.0;
    return config.relative_variance_floor * scale;
}

// One pass per iteration: the E-step evaluates log L at the current
// parameters and accumulates the responsibility-weighted moments about the
// current means, from which the M-step updates follow directly.
class EmRunner
{
  public:
    EmRunner(std::span<const double> data, const EmConfig& config, double floor)
        : data_(data), config_(config), floor_(floor)
    {
    }

    EmFit run(GmmModel model)
    {
        EmFit fit;
        double previous = -std::numeric_limits<double>::infinity();
        for (std::size_t iteration = 0;; ++iteration) {
            const double ll = expectation(model);
            if (config_.record_trace) {
                fit.log_likelihood_trace.push_back(ll);
            }
            fit.iterations = iteration;
            if (std::abs(ll - previous) <= config_.log_likelihood_tolerance * std::abs(ll)) {
                fit.converged = true;
                fit.log_likelihood = ll;
                break;
            }
            if (iteration >= config_.max_iterations) {
                fit.log_likelihood = ll;
                break;
            }
            previous = ll;
            maximization(model);
        }
        fit.degenerate = std::any_of(model.weights.begin(), model.weights.end(),
                                     [](double w) { return w < kDegenerateWeight; });
        fit.model = std::move(model);
        return fit;
    }

  private:
    double expectation(const GmmModel& model)
    {
        const std::size_t g = model.n_components;
        log_weight_.resize(g);
        log_norm_.resize(g);
        half_inv_var_.resize(g);
        term_.resize(g);
        offset_.resize(g);
        mass_.assign(g, 0.0);
        first_.assign(g, 0.0);
        second_.assign(g, 0.0);
        for (std::size_t k = 0; k < g; ++k) {
            log_weight_[k] = model.weights[k] > 0.0 ? std::log(model.weights[k])
                                                    : -std::numeric_limits<double>::infinity();
            log_norm_[k] = log_weight_[k] - 0.5 * (kLogTwoPi + std::log(model.variances[k]));
            half_inv_var_[k] = 0.5 / model.variances[k];
        }
        double total = 0.0;
        for (const double x : data_) {
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < g; ++k) {
                offset_[k] = x - model.means[k];
                term_[k] = log_norm_[k] - offset_[k] * offset_[k] * half_inv_var_[k];
                peak = std::max(peak, term_[k]);
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < g; ++k) {
                const double gap = term_[k] - peak;
                term_[k] = gap < kNegligibleLogRatio ? 0.0 : std::exp(gap);
                sum += term_[k];
            }
            const double inv_sum = 1.0 / sum;
            for (std::size_t k = 0; k < g; ++k) {
                const double r = term_[k] * inv_sum;
                mass_[k] += r;
                first_[k] += r * offset_[k];
                second_[k] += r * offset_[k] * offset_[k];
            }
            total += peak + std::log(sum);
        }
        return total;
    }

    // Uses the moments accumulated by the preceding expectation().
    void maximization(GmmModel& model)
    {
        const std::size_t g = model.n_components;
        const auto n = static_cast<double>(data_.size());
        double pooled = 0.0;
        for (std::size_t k = 0; k < g; ++k) {
            model.weights[k] = mass_[k] / n;
            if (mass_[k] > std::numeric_limits<double>::min()) {
                const double shift = first_[k] / mass_[k];
                model.means[k] += shift;
                // Scatter about the new mean from moments about the old one.
                const double scatter = std::max(second_[k] - mass_[k] * shift * shift, 0.0);
                pooled += scatter;
                if (!model.equal_variance) {
                    model.variances[k] = std::max(scatter / mass_[k], floor_);
                }
            }
        }
        if (model.equal_variance) {
            std::fill(model.variances.begin(), model.variances.end(), std::max(pooled / n, floor_));
        }
    }

    std::span<const double> data_;
    const EmConfig& config_;
    double floor_;
    std::vector<double> log_weight_, log_norm_, half_inv_var_, term_, offset_;
    std::vector<double> mass_, first_, second_;
};

GmmModel quantile_start(std::span<const double> data, std::size_t g, bool equal_variance, double floor)
{
    std::vector<double> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end());
    GmmModel model;
    model.n_components = g;
    model.equal_variance = equal_variance;
    model.weights.assign(g, 1.0 / static_cast<double>(g));
    model.means.resize(g);
    const auto n = static_cast<double>(sorted.size());
    for (std::size_t k = 0; k < g; ++k) {
        const double position = (static_cast<double>(k) + 0.5) / static_cast<double>(g) * n - 0.5;
        const auto lo = static_cast<std::size_t>(std::clamp(std::floor(position), 0.0, n - 1));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = std::clamp(position - static_cast<double>(lo), 0.0, 1.0);
        model.means[k] = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    }
    // Pooled within-cluster variance under nearest-mean assignment.
    double ss = 0.0;
    for (double x : data) {
        double best = std::numeric_limits<double>::infinity();
        for (double mu : model.means) {
            best = std::min(best, (x - mu) * (x - mu));
        }
        ss += best;
    }
    double pooled = ss / n;
    if (!(pooled > floor)) {
        pooled = std::max(moments(data).variance, floor);
    }
    model.variances.assign(g, pooled);
    return model;
}

} // namespace

std::size_t gmm_dimension(std::size_t n_components, bool equal_variance)
{
    return equal_variance ? 2 * n_components : 3 * n_components - 1;
}

EmFit em_fit(std::span<const double> data, std::size_t n_components, bool equal_variance, const EmConfig& config,
             RngStream& stream)
{
    if (n_components == 0) {
        throw std::domain_error("a mixture needs at least one component");
    }
    if (n_components > data.size()) {
        throw std::domain_error("more mixture components than data points");
    }
    const SampleMoments m = moments(data);
    const double floor = variance_floor(m, config);

    if (n_components == 1) {
        EmFit fit;
        fit.model = {1, {1.0}, {m.mean}, {std::max(m.variance, floor)}, equal_variance};
        fit.log_likelihood = gmm_log_likelihood(fit.model, data);
        fit.converged = true;
        fit.degenerate = !(m.variance > 0.0) && data.size() > 1;
        if (config.record_trace) {
            fit.log_likelihood_trace.push_back(fit.log_likelihood);
        }
        return fit;
    }

    const GmmModel base = quantile_start(data, n_components, equal_variance, floor);
    const double spread = std::sqrt(base.variances.front());
    EmRunner runner(data, config, floor);
    EmFit best = runner.run(base);
    for (std::size_t restart = 1; restart < config.n_restarts; ++restart) {
        GmmModel start = base;
        for (double& mu : start.means) {
            mu += (stream.uniform() - 0.5) * spread;
        }
        EmFit candidate = runner.run(std::move(start));
        if (candidate.log_likelihood > best.log_likelihood) {
            best = std::move(candidate);
        }
    }
    if (!(m.variance > 0.0)) {
        best.degenerate = true;
    }
    return best;
}

EmFit em_refine(std::span<const double> data, const GmmModel& start, const EmConfig& config)
{
    if (start.n_components == 0 || start.n_components > data.size()) {
        throw std::domain_error("invalid component count for the data");
    }
    const SampleMoments m = moments(data);
    const double floor = variance_floor(m, config);
    if (start.n_components == 1) {
        EmFit fit;
        fit.model = {1, {1.0}, {m.mean}, {std::max(m.variance, floor)}, start.equal_variance};
        fit.log_likelihood = gmm_log_likelihood(fit.model, data);
        fit.converged = true;
        return fit;
    }
    EmRunner runner(data, config, floor);
    return runner.run(start);
}

double gmm_log_likelihood(const GmmModel& model, std::span<const double> data)
{
    double total = 0.0;
    std::vector<double> terms(model.n_components);
    for (double x : data) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < model.n_components; ++k) {
            terms[k] = model.weights[k] > 0.0
                           ? std::log(model.weights[k]) + log_normal_density(x, model.means[k], model.variances[k])
                           : -std::numeric_limits<double>::infinity();
            peak = std::max(peak, terms[k]);
        }
        double sum = 0.0;
        for (double t : terms) {
            sum += std::exp(t - peak);
        }
        total += peak + std::log(sum);
    }
    return total;
}

double gmm_bic(double log_likelihood, std::size_t n_components, bool equal_variance, std::size_t m)
{
    if (m == 0) {
        throw std::domain_error("BIC needs a positive sample size");
    }
    const auto d = static_cast<double>(gmm_dimension(n_components, equal_variance));
    return d * std::log(static_cast<double>(m)) - 2.0 * log_likelihood;
}

double gmm_sample(const GmmModel& model, RngStream& stream)
{
    const double u = stream.uniform();
    double cumulative = 0.0;
    std::size_t component = model.n_components - 1;
    for (std::size_t k = 0; k < model.n_components; ++k) {
        cumulative += model.weights[k];
        if (u < cumulative) {
            component = k;
            break;
        }
    }
    // Rounding can leave the tail above the last cumulative weight; never
    // land on a zero-weight component.
    while (model.weights[component] <= 0.0 && component > 0) {
        --component;
    }
    return sample_normal(stream, model.means[component], std::sqrt(model.variances[component]));
}

std::vector<MixtureCandidate> mixture_candidates(std::size_t max_components, bool include_equal,
                                                 bool include_unequal)
{
    std::vector<MixtureCandidate> out;
    for (std::size_t g = 1; g <= max_components; ++g) {
        if (include_equal) {
            out.push_back({g, true});
        }
        if (include_unequal) {
            out.push_back({g, false});
        }
    }
    return out;
}

ResamplingProblem<MixtureData, double> density_problem(std::span<const MixtureCandidate> candidates,
                                                       const EmConfig& config)
{
    ResamplingProblem<MixtureData, double> problem;
    EmConfig refit = config;
    refit.max_iterations = config.refit_max_iterations;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        const MixtureCandidate candidate = candidates[j];
        CandidateModel<MixtureData, double> model;
        model.label = "G=" + std::to_string(candidate.n_components) + (candidate.equal_variance ? ",E" : ",V");
        model.fit = [candidate, config, refit, j](const MixtureData& data) {
            if (data.warm_start.size() <= j) {
                data.warm_start.resize(j + 1);
            }
            std::optional<GmmModel>& warm = data.warm_start[j];
            EmFit fit;
            if (warm) {
                fit = em_refine(data.values, *warm, refit);
            } else {
                RngStream restarts = derive_trial_stream(0x6D6978747572650Aull, j);
                fit = em_fit(data.values, candidate.n_components, candidate.equal_variance, config, restarts);
            }
            warm = fit.model;
            FittedModel fitted;
            fitted.model_id = candidate.n_components;
            fitted.max_log_likelihood = fit.log_likelihood;
            fitted.dimension = gmm_dimension(candidate.n_components, candidate.equal_variance);
            fitted.sampler_state = std::move(fit.model);
            return fitted;
        };
        model.sample_next = [](const FittedModel& fitted, RngStream& stream) {
            return gmm_sample(std::any_cast<const GmmModel&>(fitted.sampler_state), stream);
        };
        problem.models.push_back(std::move(model));
    }
    problem.criterion = Criterion::bic();
    problem.append = [](MixtureData& data, double&& x) { data.values.push_back(x); };
    problem.summary = [](const MixtureData&, const FittedModel& fitted) {
        return static_cast<double>(fitted.id());
    };
    return problem;
}

std::size_t DensityPosterior::modal_components() const
{
    std::size_t mode = 0;
    double best = -1.0;
    for (const auto& [g, p] : probability_by_components) {
        if (p > best) {
            best = p;
            mode = g;
        }
    }
    return mode;
}

double DensityPosterior::probability(std::size_t g) const
{
    const auto it = probability_by_components.find(g);
    return it == probability_by_components.end() ? 0.0 : it->second;
}

DensityPosterior density_resample(std::span<const double> data, std::span<const MixtureCandidate> candidates,
                                  const ResamplingConfig& config, const EmConfig& em_config)
{
    if (candidates.empty()) {
        throw std::invalid_argument("density_resample needs at least one candidate");
    }
    MixtureData observed;
    observed.values.assign(data.begin(), data.end());
    DensityPosterior out;
    out.run = run_resampling(density_problem(candidates, em_config), observed, config);
    for (const auto& [id, p] : out.run.posterior.probabilities) {
        out.probability_by_components[static_cast<std::size_t>(id)] = p;
    }
    return out;
}

std::vector<double> sample_two_component(std::uint64_t seed, std::size_t n, double sigma)
{
    RngStream stream = derive_trial_stream(seed, 0x7477);
    std::vector<double> out(n);
    for (double& x : out) {
        const double center = stream.uniform() < 0.5 ? -1.0 : 1.0;
        x = center + sigma * stream.standard_normal();
    }
    return out;
}

std::vector<double> sample_three_component(std::uint64_t seed, std::size_t n)
{
    RngStream stream = derive_trial_stream(seed, 0x7468);
    std::vector<double> out(n);
    for (double& x : out) {
        const double u = stream.uniform();
        const double center = u < 0.4 ? -3.0 : (u < 0.7 ? 0.0 : 4.0);
        x = center + stream.standard_normal();
    }
    return out;
}

} // namespace predres
