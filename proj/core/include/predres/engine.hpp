// SPDX-License-Identifier: Apache-2.0
//
// Predictive resampling over a list of candidate models.
//
// A trial alternates two steps until the working dataset reaches the final
// size N: pick the candidate that maximizes the selection criterion on the
// current data, then impute new data from that fitted candidate. The model
// selected on the completed data is the trial's outcome, and the empirical
// distribution of outcomes over B independent trials is the posterior over
// models.
//
// All criteria are expressed as scores to MAXIMIZE. BIC and AIC are negated
// on the way in, so "larger is better" holds for every kind.
#pragma once

#include "predres/distributions.hpp"
#include "predres/parallel.hpp"

#include <any>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace predres {

/// Key of a selected model. Defaults to the candidate index; fits that search
/// a model space internally (stepwise regression) refine it, e.g. to a
/// bitmask of active columns.
using ModelId = std::uint64_t;

struct FittedModel
{
    std::size_t model_index = 0;
    std::optional<ModelId> model_id;
    /// log L-hat up to an additive constant shared by every candidate fitted
    /// on the same data.
    double max_log_likelihood = 0.0;
    std::size_t dimension = 0;
    /// |theta|, only consulted by penalized criteria.
    double parameter_norm = 0.0;
    std::any sampler_state;

    ModelId id() const { return model_id.value_or(static_cast<ModelId>(model_index)); }
};

enum class CriterionKind
{
    LogLikelihood,
    Aic,
    Bic,
    Penalized,
};

/// log c(m, d, |theta|) for a penalized likelihood c * L.
using LogPenalty = std::function<double(std::size_t m, std::size_t d, double theta_norm)>;

struct Criterion
{
    CriterionKind kind = CriterionKind::Bic;
    LogPenalty log_penalty;

    static Criterion log_likelihood() { return {CriterionKind::LogLikelihood, {}}; }
    static Criterion aic() { return {CriterionKind::Aic, {}}; }
    static Criterion bic() { return {CriterionKind::Bic, {}}; }
    static Criterion penalized(LogPenalty penalty) { return {CriterionKind::Penalized, std::move(penalty)}; }
};

/// Larger is better: LogLikelihood -> log L, BIC -> -(d log m - 2 log L),
/// AIC -> -(2d - 2 log L), Penalized -> log c(m, d, |theta|) + log L.
/// Throws std::domain_error when m == 0.
double criterion_score(const Criterion& criterion, const FittedModel& fitted, std::size_t m);

/// Raised by a candidate's fit; carries the candidate label.
class ModelFitError : public std::runtime_error
{
  public:
    ModelFitError(std::string label, const std::string& message)
        : std::runtime_error(label + ": " + message), label_(std::move(label))
    {
    }
    const std::string& label() const noexcept { return label_; }

  private:
    std::string label_;
};

/// Anything with a sample size. `size()` is the m used by criteria and the
/// quantity compared against the final size N.
template <class T>
concept ResamplingDataset = std::copy_constructible<T> && requires(const T& data) {
    { data.size() } -> std::convertible_to<std::size_t>;
};

template <class Dataset, class Observation>
struct CandidateModel
{
    std::string label;
    /// Deterministic given the dataset. May throw; any exception is reported
    /// as a ModelFitError carrying `label`.
    std::function<FittedModel(const Dataset&)> fit;
    /// Draws from p(. | fitted model).
    std::function<Observation(const FittedModel&, RngStream&)> sample_next;
};

struct Selection
{
    std::size_t index = 0;
    FittedModel fitted;
};

/// Fits every candidate and returns the argmax of criterion_score. Ties go to
/// the smaller dimension, then to the smaller index.
template <ResamplingDataset Dataset, class Observation>
Selection select_best(std::span<const CandidateModel<Dataset, Observation>> models, const Dataset& data,
                      const Criterion& criterion)
{
    if (models.empty()) {
        throw std::invalid_argument("select_best needs at least one candidate model");
    }
    const std::size_t m = data.size();
    std::optional<Selection> best;
    double best_score = 0.0;
    for (std::size_t k = 0; k < models.size(); ++k) {
        FittedModel fitted;
        try {
            fitted = models[k].fit(data);
        } catch (const ModelFitError&) {
            throw;
        } catch (const std::exception& error) {
            throw ModelFitError(models[k].label, error.what());
        }
        fitted.model_index = k;
        const double score = criterion_score(criterion, fitted, m);
        const bool better = !best || score > best_score ||
                            (score == best_score && fitted.dimension < best->fitted.dimension);
        if (better) {
            best_score = score;
            best = Selection{k, std::move(fitted)};
        }
    }
    return std::move(*best);
}

struct ResamplingConfig
{
    std::size_t n_observed = 0;
    std::size_t n_final = 0;
    std::size_t n_trials = 1;
    std::uint64_t master_seed = 0;
    /// Record every j-th step; 0 picks the default (every step up to 5000
    /// imputation steps, otherwise ceil(steps / 5000)).
    std::size_t trace_thinning = 0;
    std::size_t workers = 1;
};

/// Throws std::invalid_argument on n_final < n_observed or n_trials == 0.
void validate(const ResamplingConfig& config);

/// Thinning interval in units of imputation steps for a run that performs
/// `steps` imputations.
std::size_t effective_thinning(const ResamplingConfig& config, std::size_t steps);

struct TrialTrace
{
    std::size_t trial_index = 0;
    /// Imputation step of each recorded entry; 0 is the observed data.
    std::vector<std::size_t> steps;
    std::vector<ModelId> selected_path;
    std::vector<double> summary_path;
    ModelId final_model = 0;
    bool aborted = false;
    std::size_t abort_step = 0;
    std::string abort_reason;
};

struct PosteriorModelProbabilities
{
    std::map<ModelId, double> probabilities;
    std::map<ModelId, std::size_t> counts;
    /// Completed trials (the denominator).
    std::size_t n_trials = 0;
    std::size_t n_aborted = 0;

    double probability(ModelId id) const
    {
        const auto it = probabilities.find(id);
        return it == probabilities.end() ? 0.0 : it->second;
    }
};

/// Exact empirical frequencies of final models; aborted trials are counted
/// separately and excluded from the denominator.
PosteriorModelProbabilities aggregate(std::span<const TrialTrace> traces);

template <class Dataset, class Observation>
struct ResamplingProblem
{
    std::vector<CandidateModel<Dataset, Observation>> models;
    Criterion criterion;
    /// Adds one imputed observation (or outcome block) to the working data.
    std::function<void(Dataset&, Observation&&)> append;
    /// Experiment statistic recorded along each path, e.g. the running mean.
    std::function<double(const Dataset&, const FittedModel&)> summary;
};

struct ResamplingResult
{
    PosteriorModelProbabilities posterior;
    std::vector<TrialTrace> traces;
};

/// One trial of predictive resampling on a private copy of `observed`.
/// A fit failure aborts the trial and records the step index.
template <ResamplingDataset Dataset, class Observation>
TrialTrace run_trial(const ResamplingProblem<Dataset, Observation>& problem, const Dataset& observed,
                     const ResamplingConfig& config, RngStream stream, std::size_t trial_index = 0)
{
    validate(config);
    if (observed.size() != config.n_observed) {
        throw std::invalid_argument("dataset size does not match n_observed");
    }
    Dataset data = observed;
    const std::size_t total_steps = config.n_final - config.n_observed;
    const std::size_t thinning = effective_thinning(config, total_steps);
    const std::span<const CandidateModel<Dataset, Observation>> models(problem.models);

    TrialTrace trace;
    trace.trial_index = trial_index;
    std::size_t step = 0;
    try {
        for (;;) {
            Selection selection = select_best(models, data, problem.criterion);
            const bool done = data.size() >= config.n_final;
            if (step % thinning == 0 || done) {
                trace.steps.push_back(step);
                trace.selected_path.push_back(selection.fitted.id());
                trace.summary_path.push_back(problem.summary ? problem.summary(data, selection.fitted) : 0.0);
            }
            if (done) {
                trace.final_model = selection.fitted.id();
                break;
            }
            Observation next = problem.models[selection.index].sample_next(selection.fitted, stream);
            problem.append(data, std::move(next));
            ++step;
        }
    } catch (const std::exception& error) {
        trace.aborted = true;
        trace.abort_step = step;
        trace.abort_reason = error.what();
    }
    return trace;
}

/// B independent trials, trial b on derive_trial_stream(master_seed, b).
/// Traces are stored by trial index, so the result does not depend on the
/// worker count or execution order.
template <ResamplingDataset Dataset, class Observation>
ResamplingResult run_resampling(const ResamplingProblem<Dataset, Observation>& problem, const Dataset& observed,
                                const ResamplingConfig& config)
{
    validate(config);
    ResamplingResult result;
    result.traces.resize(config.n_trials);
    parallel_for(config.n_trials, config.workers, [&](std::size_t b) {
        result.traces[b] = run_trial(problem, observed, config, derive_trial_stream(config.master_seed, b), b);
    });
    result.posterior = aggregate(result.traces);
    return result;
}

/// Fraction of (non-aborted) trials whose selected model changes at least
/// once within the final `tail_fraction` of recorded transitions. A switch
/// into the very last entry counts.
double convergence_check(std::span<const TrialTrace> traces, double tail_fraction);

/// CSV with header `trial_index,step,selected_model,summary_stat`.
void write_trace_csv(std::ostream& out, std::span<const TrialTrace> traces);

} // namespace predres
