#include "predres/engine.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace predres;

namespace {

struct Values
{
    std::vector<double> values;
    std::size_t size() const { return values.size(); }
};

using Problem = ResamplingProblem<Values, double>;
using Candidate = CandidateModel<Values, double>;

// Unit-variance normal with a fixed mean and a declared dimension.
Candidate fixed_mean(double mean, std::size_t dimension, std::string label)
{
    Candidate c;
    c.label = std::move(label);
    c.fit = [mean, dimension](const Values& data) {
        FittedModel f;
        f.dimension = dimension;
        for (double x : data.values) {
            f.max_log_likelihood -= 0.5 * (x - mean) * (x - mean);
        }
        f.sampler_state = mean;
        return f;
    };
    c.sample_next = [](const FittedModel& f, RngStream& s) { return std::any_cast<double>(f.sampler_state) + s.standard_normal(); };
    return c;
}

Candidate constant_score(double log_lik, std::size_t dimension, std::string label)
{
    Candidate c;
    c.label = std::move(label);
    c.fit = [=](const Values&) {
        FittedModel f;
        f.max_log_likelihood = log_lik;
        f.dimension = dimension;
        return f;
    };
    c.sample_next = [](const FittedModel&, RngStream& s) { return s.uniform(); };
    return c;
}

Problem two_means(double a, double b)
{
    Problem p;
    p.models = {fixed_mean(a, 0, "a"), fixed_mean(b, 0, "b")};
    p.criterion = Criterion::log_likelihood();
    p.append = [](Values& d, double&& x) { d.values.push_back(x); };
    p.summary = [](const Values& d, const FittedModel&) {
        return std::accumulate(d.values.begin(), d.values.end(), 0.0) / double(d.values.size());
    };
    return p;
}

Selection select(std::span<const Candidate> models, const Values& data, const Criterion& criterion)
{
    return select_best(models, data, criterion);
}

TrialTrace path(std::vector<ModelId> ids)
{
    TrialTrace t;
    t.selected_path = ids;
    t.final_model = ids.back();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        t.steps.push_back(i);
        t.summary_path.push_back(0.0);
    }
    return t;
}

} // namespace

TEST_CASE("criterion_score examples")
{
    FittedModel f;
    f.max_log_likelihood = -150.0;
    f.dimension = 3;
    CHECK(criterion_score(Criterion::bic(), f, 100) == doctest::Approx(-(3 * std::log(100.0) + 300)).epsilon(1e-14));
    CHECK(std::abs(criterion_score(Criterion::bic(), f, 100) - -313.8155105579643) < 1e-10);
    CHECK(criterion_score(Criterion::aic(), f, 100) == -306.0);
    f.dimension = 0;
    CHECK(criterion_score(Criterion::bic(), f, 100) == 2 * criterion_score(Criterion::log_likelihood(), f, 100));
    CHECK(criterion_score(Criterion::log_likelihood(), f, 100) == -150.0);
    CHECK_THROWS_AS(criterion_score(Criterion::bic(), f, 0), std::domain_error);
}

TEST_CASE("penalized criterion adds the log penalty")
{
    FittedModel f;
    f.max_log_likelihood = -10.0;
    f.dimension = 2;
    f.parameter_norm = 3.0;
    const Criterion lasso = Criterion::penalized([](std::size_t m, std::size_t, double norm) {
        return -norm / std::sqrt(double(m));
    });
    CHECK(criterion_score(lasso, f, 9) == doctest::Approx(-11.0));
    CHECK_THROWS_AS(criterion_score(Criterion{CriterionKind::Penalized, {}}, f, 9), std::invalid_argument);
}

TEST_CASE("AIC minus BIC equals d (log m - 2)")
{
    RngStream stream(17);
    for (int i = 0; i < 1000; ++i) {
        FittedModel f;
        f.dimension = stream.uniform_index(30);
        f.max_log_likelihood = -1000.0 * stream.uniform();
        const std::size_t m = 1 + stream.uniform_index(100000);
        const double gap = criterion_score(Criterion::aic(), f, m) - criterion_score(Criterion::bic(), f, m);
        const double expected = double(f.dimension) * (std::log(double(m)) - 2.0);
        CHECK(std::abs(gap - expected) < 1e-9 * (1.0 + std::abs(f.max_log_likelihood)));
    }
}

TEST_CASE("select_best")
{
    const Values data{{0.1, 0.2}};
    SUBCASE("single candidate")
    {
        std::vector<Candidate> models{constant_score(-5.0, 2, "only")};
        CHECK(select(models, data, Criterion::bic()).index == 0);
    }
    SUBCASE("equal scores go to the smaller dimension")
    {
        std::vector<Candidate> models{constant_score(-5.0, 2, "big"), constant_score(-5.0, 1, "small")};
        CHECK(select(models, data, Criterion::log_likelihood()).index == 1);
    }
    SUBCASE("equal scores and dimensions go to the smaller index")
    {
        std::vector<Candidate> models{constant_score(-5.0, 1, "first"), constant_score(-5.0, 1, "second"),
                                      constant_score(-6.0, 0, "worse")};
        CHECK(select(models, data, Criterion::log_likelihood()).index == 0);
    }
    SUBCASE("maximizes the score")
    {
        std::vector<Candidate> models{constant_score(-9.0, 0, "a"), constant_score(-5.0, 1, "b"),
                                      constant_score(-7.0, 0, "c")};
        const Selection s = select(models, data, Criterion::bic());
        CHECK(s.index == 1);
        CHECK(s.fitted.model_index == 1);
    }
    SUBCASE("fit failures carry the label")
    {
        Candidate broken = constant_score(0.0, 0, "broken");
        broken.fit = [](const Values&) -> FittedModel { throw std::runtime_error("singular"); };
        std::vector<Candidate> models{constant_score(-1.0, 0, "fine"), broken};
        try {
            select(models, data, Criterion::bic());
            FAIL("expected a fit error");
        } catch (const ModelFitError& error) {
            CHECK(error.label() == "broken");
            CHECK(std::string(error.what()).find("singular") != std::string::npos);
        }
    }
    SUBCASE("empty candidate list")
    {
        std::vector<Candidate> models;
        CHECK_THROWS_AS(select(models, data, Criterion::bic()), std::invalid_argument);
    }
}

TEST_CASE("point demo selects the hypothesis nearer the sample mean")
{
    const Values data{{0.066}};
    const Problem p = two_means(0.0, 0.1);
    CHECK(select(p.models, data, p.criterion).index == 1);
}

TEST_CASE("run_trial")
{
    const Problem p = two_means(0.0, 0.1);
    const Values observed{{0.3, -0.1, 0.2}};
    SUBCASE("no imputation gives a single entry")
    {
        ResamplingConfig config{.n_observed = 3, .n_final = 3};
        const TrialTrace t = run_trial(p, observed, config, RngStream(1));
        CHECK(t.selected_path.size() == 1);
        CHECK(t.final_model == select(p.models, observed, p.criterion).index);
    }
    SUBCASE("final model is the last path entry and always a candidate")
    {
        ResamplingConfig config{.n_observed = 3, .n_final = 500};
        for (std::uint64_t b = 0; b < 20; ++b) {
            const TrialTrace t = run_trial(p, observed, config, derive_trial_stream(4, b), b);
            CHECK(!t.aborted);
            CHECK(t.selected_path.size() == 498);
            CHECK(t.final_model == t.selected_path.back());
            CHECK(t.final_model <= 1);
            CHECK(t.steps.front() == 0);
            CHECK(t.steps.back() == 497);
        }
    }
    SUBCASE("fixed stream gives identical traces and leaves the input alone")
    {
        ResamplingConfig config{.n_observed = 3, .n_final = 200};
        const Values copy = observed;
        const TrialTrace a = run_trial(p, observed, config, RngStream(99));
        const TrialTrace b = run_trial(p, observed, config, RngStream(99));
        CHECK(a.selected_path == b.selected_path);
        CHECK(a.summary_path == b.summary_path);
        CHECK(observed.values == copy.values);
    }
    SUBCASE("thinning records every j-th step and the final one")
    {
        ResamplingConfig config{.n_observed = 3, .n_final = 3 + 10, .trace_thinning = 4};
        const TrialTrace t = run_trial(p, observed, config, RngStream(5));
        CHECK(t.steps == std::vector<std::size_t>{0, 4, 8, 10});
    }
    SUBCASE("a fit failure aborts with the step index")
    {
        Problem failing = p;
        failing.models[1].fit = [](const Values& d) -> FittedModel {
            if (d.size() >= 6) {
                throw std::runtime_error("too many");
            }
            FittedModel f;
            f.max_log_likelihood = -1e9;
            return f;
        };
        ResamplingConfig config{.n_observed = 3, .n_final = 10};
        const TrialTrace t = run_trial(failing, observed, config, RngStream(5));
        CHECK(t.aborted);
        CHECK(t.abort_step == 3);
        CHECK(t.abort_reason.find("b: too many") != std::string::npos);
    }
    SUBCASE("dataset size must match n_observed")
    {
        ResamplingConfig config{.n_observed = 4, .n_final = 10};
        CHECK_THROWS_AS(run_trial(p, observed, config, RngStream(5)), std::invalid_argument);
    }
}

TEST_CASE("effective_thinning")
{
    ResamplingConfig config;
    CHECK(effective_thinning(config, 0) == 1);
    CHECK(effective_thinning(config, 5000) == 1);
    CHECK(effective_thinning(config, 5001) == 2);
    CHECK(effective_thinning(config, 20000) == 4);
    config.trace_thinning = 7;
    CHECK(effective_thinning(config, 20000) == 7);
}

TEST_CASE("config validation")
{
    CHECK_THROWS_AS(validate(ResamplingConfig{.n_observed = 5, .n_final = 4}), std::invalid_argument);
    CHECK_THROWS_AS(validate(ResamplingConfig{.n_observed = 5, .n_final = 6, .n_trials = 0}), std::invalid_argument);
    CHECK_NOTHROW(validate(ResamplingConfig{.n_observed = 5, .n_final = 5}));
}

TEST_CASE("aggregate counts final models exactly")
{
    std::vector<TrialTrace> traces{path({0}), path({0}), path({1}), path({0})};
    const PosteriorModelProbabilities post = aggregate(traces);
    CHECK(post.probability(0) == 0.75);
    CHECK(post.probability(1) == 0.25);
    CHECK(post.probability(7) == 0.0);
    CHECK(post.n_trials == 4);

    TrialTrace aborted = path({1});
    aborted.aborted = true;
    traces.push_back(aborted);
    const PosteriorModelProbabilities with_abort = aggregate(traces);
    CHECK(with_abort.n_aborted == 1);
    CHECK(with_abort.n_trials == 4);
    CHECK(with_abort.probability(1) == 0.25);
}

TEST_CASE("run_resampling")
{
    const Values observed{{0.3, -0.1, 0.2, 0.05}};
    SUBCASE("single candidate gets probability one")
    {
        Problem p = two_means(0.0, 0.1);
        p.models.pop_back();
        const ResamplingConfig config{.n_observed = 4, .n_final = 30, .n_trials = 13};
        const ResamplingResult r = run_resampling(p, observed, config);
        CHECK(r.posterior.probability(0) == 1.0);
        CHECK(r.traces.size() == 13);
    }
    SUBCASE("probabilities times B are integers summing to one")
    {
        const Problem p = two_means(0.0, 0.1);
        const ResamplingConfig config{.n_observed = 4, .n_final = 300, .n_trials = 37, .master_seed = 3};
        const ResamplingResult r = run_resampling(p, observed, config);
        double total = 0.0;
        for (const auto& [id, prob] : r.posterior.probabilities) {
            const double scaled = prob * 37.0;
            CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
            CHECK(double(r.posterior.counts.at(id)) / 37.0 == prob);
            total += prob;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    SUBCASE("result does not depend on worker count or trial order")
    {
        const Problem p = two_means(0.0, 0.1);
        ResamplingConfig config{.n_observed = 4, .n_final = 300, .n_trials = 24, .master_seed = 8};
        const ResamplingResult serial = run_resampling(p, observed, config);
        config.workers = 4;
        const ResamplingResult parallel = run_resampling(p, observed, config);
        CHECK(serial.posterior.probabilities == parallel.posterior.probabilities);
        for (std::size_t b = 0; b < 24; ++b) {
            CHECK(serial.traces[b].selected_path == parallel.traces[b].selected_path);
            CHECK(serial.traces[b].trial_index == b);
        }
        // Reverse execution order trial by trial.
        std::vector<TrialTrace> reversed(24);
        for (std::size_t i = 24; i-- > 0;) {
            reversed[i] = run_trial(p, observed, config, derive_trial_stream(8, i), i);
        }
        CHECK(aggregate(reversed).probabilities == serial.posterior.probabilities);
    }
}

TEST_CASE("convergence_check")
{
    std::vector<TrialTrace> constant{path({0, 0, 0, 0, 0}), path({1, 1, 1})};
    CHECK(convergence_check(constant, 0.1) == 0.0);
    std::vector<TrialTrace> late{path({0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1}), path({0, 0, 0})};
    CHECK(convergence_check(late, 0.1) == 0.5);
    std::vector<TrialTrace> early{path({1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0})};
    CHECK(convergence_check(early, 0.1) == 0.0);
    CHECK_THROWS_AS(convergence_check(constant, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(convergence_check(constant, 1.0), std::invalid_argument);
}

TEST_CASE("trace CSV layout")
{
    TrialTrace t = path({0, 1});
    t.trial_index = 3;
    t.summary_path = {0.5, 0.25};
    std::ostringstream out;
    write_trace_csv(out, std::vector<TrialTrace>{t});
    CHECK(out.str() == "trial_index,step,selected_model,summary_stat\n3,0,0,0.5\n3,1,1,0.25\n");
}
