// SPDX-License-Identifier: Apache-2.0
#include "predres/engine.hpp"

#include "predres/report.hpp"

#include <cmath>

namespace predres {

double criterion_score(const Criterion& criterion, const FittedModel& fitted, std::size_t m)
{
    if (m == 0) {
        throw std::domain_error("criterion_score needs a positive sample size");
    }
    const double log_lik = fitted.max_log_likelihood;
    const auto d = static_cast<double>(fitted.dimension);
    switch (criterion.kind) {
    case CriterionKind::LogLikelihood:
        return log_lik;
    case CriterionKind::Bic:
        return -(d * std::log(static_cast<double>(m)) - 2.0 * log_lik);
    case CriterionKind::Aic:
        return -(2.0 * d - 2.0 * log_lik);
    case CriterionKind::Penalized:
        if (!criterion.log_penalty) {
            throw std::invalid_argument("penalized criterion without a penalty function");
        }
        return criterion.log_penalty(m, fitted.dimension, fitted.parameter_norm) + log_lik;
    }
    throw std::invalid_argument("unknown criterion kind");
}

void validate(const ResamplingConfig& config)
{
    if (config.n_final < config.n_observed) {
        throw std::invalid_argument("n_final must be at least n_observed");
    }
    if (config.n_trials == 0) {
        throw std::invalid_argument("n_trials must be positive");
    }
}

std::size_t effective_thinning(const ResamplingConfig& config, std::size_t steps)
{
    if (config.trace_thinning > 0) {
        return config.trace_thinning;
    }
    constexpr std::size_t kMaxRecorded = 5000;
    if (steps <= kMaxRecorded) {
        return 1;
    }
    return (steps + kMaxRecorded - 1) / kMaxRecorded;
}

PosteriorModelProbabilities aggregate(std::span<const TrialTrace> traces)
{
    PosteriorModelProbabilities posterior;
    for (const TrialTrace& trace : traces) {
        if (trace.aborted) {
            ++posterior.n_aborted;
            continue;
        }
        ++posterior.counts[trace.final_model];
        ++posterior.n_trials;
    }
    for (const auto& [id, count] : posterior.counts) {
        posterior.probabilities[id] = static_cast<double>(count) / static_cast<double>(posterior.n_trials);
    }
    return posterior;
}

double convergence_check(std::span<const TrialTrace> traces, double tail_fraction)
{
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) {
        throw std::invalid_argument("tail_fraction must lie in (0, 1)");
    }
    std::size_t considered = 0;
    std::size_t switching = 0;
    for (const TrialTrace& trace : traces) {
        if (trace.aborted) {
            continue;
        }
        ++considered;
        const std::size_t length = trace.selected_path.size();
        if (length < 2) {
            continue;
        }
        const std::size_t transitions = length - 1;
        const auto tail = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(transitions))));
        for (std::size_t j = length - tail; j < length; ++j) {
            if (trace.selected_path[j] != trace.selected_path[j - 1]) {
                ++switching;
                break;
            }
        }
    }
    if (considered == 0) {
        return 0.0;
    }
    return static_cast<double>(switching) / static_cast<double>(considered);
}

void write_trace_csv(std::ostream& out, std::span<const TrialTrace> traces)
{
    out << "trial_index,step,selected_model,summary_stat\n";
    for (const TrialTrace& trace : traces) {
        for (std::size_t i = 0; i < trace.steps.size(); ++i) {
            out << trace.trial_index << ',' << trace.steps[i] << ',' << trace.selected_path[i] << ','
                << format_number(trace.summary_path[i]) << '\n';
        }
    }
}

} // namespace predres
