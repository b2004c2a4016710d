// SPDX-License-Identifier: Apache-2.0
#include "predres/hot_hand.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace predres {

namespace {

constexpr std::uint64_t kGameStreamTag = 0x67616D6573;
constexpr std::uint64_t kSweepSeedTag = std::uint64_t{3} << 40;

using Point = std::array<double, 2>;

struct Vertex
{
    Point x;
    double value = 0.0; // negated log-likelihood
};

Point clamp_to_box(Point x)
{
    static const double lo = std::log(kMinShape);
    static const double hi = std::log(kMaxShape);
    for (double& v : x) {
        v = std::clamp(v, lo, hi);
    }
    return x;
}

Vertex evaluate(const BetaBinomialCounts& counts, Point x)
{
    x = clamp_to_box(x);
    return {x, -counts.log_likelihood(std::exp(x[0]), std::exp(x[1]))};
}

Point affine(const Point& from, const Point& to, double t)
{
    return {from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])};
}

// Minimizes the negated log-likelihood over log shapes; returns whether the
// tolerances were met within the evaluation budget.
bool nelder_mead(const BetaBinomialCounts& counts, Vertex& best, const NelderMeadOptions& options)
{
    std::array<Vertex, 3> simplex{
        best,
        evaluate(counts, {best.x[0] + options.initial_step, best.x[1]}),
        evaluate(counts, {best.x[0], best.x[1] + options.initial_step}),
    };
    std::size_t evaluations = 2;
    auto order = [&] {
        std::sort(simplex.begin(), simplex.end(), [](const Vertex& l, const Vertex& r) { return l.value < r.value; });
    };
    bool converged = false;
    while (evaluations < options.max_evaluations) {
        order();
        const double spread = simplex[2].value - simplex[0].value;
        double size = 0.0;
        for (std::size_t i = 1; i < 3; ++i) {
            for (std::size_t c = 0; c < 2; ++c) {
                size = std::max(size, std::abs(simplex[i].x[c] - simplex[0].x[c]));
            }
        }
        if (spread <= options.value_tolerance * (1.0 + std::abs(simplex[0].value)) &&
            size <= options.point_tolerance) {
            converged = true;
            break;
        }
        const Point centroid{(simplex[0].x[0] + simplex[1].x[0]) / 2, (simplex[0].x[1] + simplex[1].x[1]) / 2};
        const Vertex reflected = evaluate(counts, affine(centroid, simplex[2].x, -1.0));
        ++evaluations;
        if (reflected.value < simplex[0].value) {
            const Vertex expanded = evaluate(counts, affine(centroid, simplex[2].x, -2.0));
            ++evaluations;
            simplex[2] = expanded.value < reflected.value ? expanded : reflected;
            continue;
        }
        if (reflected.value < simplex[1].value) {
            simplex[2] = reflected;
            continue;
        }
        const bool outside = reflected.value < simplex[2].value;
        const Vertex contracted =
            evaluate(counts, affine(centroid, outside ? reflected.x : simplex[2].x, 0.5));
        ++evaluations;
        if (contracted.value < std::min(reflected.value, simplex[2].value)) {
            simplex[2] = contracted;
            continue;
        }
        for (std::size_t i = 1; i < 3; ++i) {
            simplex[i] = evaluate(counts, affine(simplex[0].x, simplex[i].x, 0.5));
            ++evaluations;
        }
    }
    order();
    best = simplex[0];
    return converged;
}

BetaBinFit finish(const BetaBinomialCounts& counts, Vertex best, bool converged)
{
    const Vertex unit = evaluate(counts, {0.0, 0.0});
    if (unit.value < best.value) {
        best = unit;
    }
    BetaBinFit fit;
    fit.a_hat = std::exp(best.x[0]);
    fit.b_hat = std::exp(best.x[1]);
    fit.log_likelihood = -best.value;
    fit.converged = converged && !counts.all_extreme();
    return fit;
}

struct GameSampler
{
    std::shared_ptr<const std::vector<double>> shots;
    double a = 1.0;
    double b = 1.0;
};

} // namespace

void validate(const GameRecord& game)
{
    if (game.shots == 0) {
        throw std::domain_error("a game needs at least one shot");
    }
    if (game.made > game.shots) {
        throw std::domain_error("made shots exceed attempts");
    }
}

double null_log_likelihood(std::span<const GameRecord> games)
{
    if (games.empty()) {
        throw std::invalid_argument("null_log_likelihood needs at least one game");
    }
    double total = 0.0;
    for (const GameRecord& game : games) {
        validate(game);
        const auto k = static_cast<double>(game.made);
        const auto rest = static_cast<double>(game.shots - game.made);
        total += log_binomial_coefficient(game.shots, game.made) + log_beta(k + 1.0, rest + 1.0) - log_beta(1.0, 1.0);
    }
    return total;
}

double alt_log_likelihood(std::span<const GameRecord> games, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("beta-binomial shapes must be positive");
    }
    double total = 0.0;
    for (const GameRecord& game : games) {
        validate(game);
        total += log_pmf_beta_binomial(game.made, {game.shots, a, b});
    }
    return total;
}

BetaBinomialCounts::BetaBinomialCounts(std::span<const GameRecord> games)
{
    for (const GameRecord& game : games) {
        add(game);
    }
}

void BetaBinomialCounts::add(const GameRecord& game)
{
    validate(game);
    if (shots_above_.size() < game.shots) {
        made_above_.resize(game.shots, 0.0);
        missed_above_.resize(game.shots, 0.0);
        shots_above_.resize(game.shots, 0.0);
    }
    for (std::uint64_t j = 0; j < game.made; ++j) {
        made_above_[j] += 1.0;
    }
    for (std::uint64_t j = 0; j < game.shots - game.made; ++j) {
        missed_above_[j] += 1.0;
    }
    for (std::uint64_t j = 0; j < game.shots; ++j) {
        shots_above_[j] += 1.0;
    }
    log_choose_total_ += log_binomial_coefficient(game.shots, game.made);
    ++n_games_;
    if (game.made != 0 && game.made != game.shots) {
        ++n_mixed_;
    }
}

double BetaBinomialCounts::log_likelihood(double a, double b) const
{
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("beta-binomial shapes must be positive");
    }
    double total = log_choose_total_;
    for (std::size_t j = 0; j < shots_above_.size(); ++j) {
        const auto jd = static_cast<double>(j);
        if (made_above_[j] > 0.0) {
            total += made_above_[j] * std::log(a + jd);
        }
        if (missed_above_[j] > 0.0) {
            total += missed_above_[j] * std::log(b + jd);
        }
        total -= shots_above_[j] * std::log(a + b + jd);
    }
    return total;
}

BetaBinFit fit_ab(std::span<const GameRecord> games, const NelderMeadOptions& options)
{
    if (games.empty()) {
        throw std::invalid_argument("fit_ab needs at least one game");
    }
    return fit_ab(BetaBinomialCounts(games), options);
}

BetaBinFit fit_ab(const BetaBinomialCounts& counts, const NelderMeadOptions& options)
{
    if (counts.n_games() == 0) {
        throw std::invalid_argument("fit_ab needs at least one game");
    }
    constexpr int kGridPoints = 11;
    const double lo = std::log(1e-2);
    const double hi = std::log(1e3);
    Vertex best = evaluate(counts, {0.0, 0.0});
    for (int i = 0; i < kGridPoints; ++i) {
        for (int j = 0; j < kGridPoints; ++j) {
            const Point x{lo + (hi - lo) * i / (kGridPoints - 1), lo + (hi - lo) * j / (kGridPoints - 1)};
            const Vertex v = evaluate(counts, x);
            if (v.value < best.value) {
                best = v;
            }
        }
    }
    const bool converged = nelder_mead(counts, best, options);
    return finish(counts, best, converged);
}

BetaBinFit refine_ab(const BetaBinomialCounts& counts, double a, double b, const NelderMeadOptions& options)
{
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("beta-binomial shapes must be positive");
    }
    Vertex best = evaluate(counts, {std::log(a), std::log(b)});
    const bool converged = nelder_mead(counts, best, options);
    return finish(counts, best, converged);
}

GameSet GameSet::from(std::span<const GameRecord> games)
{
    auto shots = std::make_shared<std::vector<double>>();
    shots->reserve(games.size());
    for (const GameRecord& game : games) {
        shots->push_back(static_cast<double>(game.shots));
    }
    return {std::move(shots), BetaBinomialCounts(games), std::nullopt};
}

ResamplingProblem<GameSet, GameRecord> hot_hand_problem()
{
    auto sample = [](const FittedModel& fitted, RngStream& stream) {
        const auto& sampler = std::any_cast<const GameSampler&>(fitted.sampler_state);
        GameRecord game;
        game.shots = static_cast<std::uint64_t>(bootstrap_draw(stream, *sampler.shots));
        game.made = sample_beta_binomial(stream, {game.shots, sampler.a, sampler.b});
        return game;
    };

    ResamplingProblem<GameSet, GameRecord> problem;
    problem.models.push_back({
        .label = "binomial",
        .fit =
            [](const GameSet& data) {
                FittedModel fitted;
                fitted.dimension = 1;
                fitted.max_log_likelihood = data.counts.log_likelihood(1.0, 1.0);
                fitted.sampler_state = GameSampler{data.observed_shots, 1.0, 1.0};
                return fitted;
            },
        .sample_next = sample,
    });
    problem.models.push_back({
        .label = "beta-binomial",
        .fit =
            [](const GameSet& data) {
                const BetaBinFit fit = data.warm_start
                                           ? refine_ab(data.counts, data.warm_start->a_hat, data.warm_start->b_hat)
                                           : fit_ab(data.counts);
                data.warm_start = fit;
                FittedModel fitted;
                fitted.dimension = 2;
                fitted.max_log_likelihood = fit.log_likelihood;
                fitted.parameter_norm = std::hypot(fit.a_hat, fit.b_hat);
                fitted.sampler_state = GameSampler{data.observed_shots, fit.a_hat, fit.b_hat};
                return fitted;
            },
        .sample_next = sample,
    });
    problem.criterion = Criterion::bic();
    problem.append = [](GameSet& data, GameRecord&& game) { data.counts.add(game); };
    problem.summary = [](const GameSet&, const FittedModel& fitted) {
        const auto& sampler = std::any_cast<const GameSampler&>(fitted.sampler_state);
        return sampler.a / (sampler.a + sampler.b);
    };
    return problem;
}

ResamplingResult hot_hand_resample(std::span<const GameRecord> games, const HotHandConfig& config)
{
    if (games.size() < 2) {
        throw std::invalid_argument("hot hand test needs at least two games");
    }
    ResamplingConfig resampling;
    resampling.n_observed = games.size();
    resampling.n_final = config.n_total_games;
    resampling.n_trials = config.n_trials;
    resampling.master_seed = config.master_seed;
    resampling.workers = config.workers;
    return run_resampling(hot_hand_problem(), GameSet::from(games), resampling);
}

std::vector<GameRecord> simulate_games(std::uint64_t seed, double alpha, std::size_t n_games, std::uint64_t min_shots,
                                       std::uint64_t max_shots)
{
    if (min_shots == 0 || max_shots < min_shots) {
        throw std::invalid_argument("invalid shot range");
    }
    if (!(alpha > 0.0)) {
        throw std::domain_error("alpha must be positive");
    }
    RngStream stream = derive_trial_stream(seed, kGameStreamTag);
    std::vector<GameRecord> games(n_games);
    for (GameRecord& game : games) {
        game.shots = min_shots + stream.uniform_index(max_shots - min_shots + 1);
        game.made = sample_binomial(stream, game.shots, sample_beta(stream, alpha, alpha));
    }
    return games;
}

std::uint64_t sweep_master_seed(std::uint64_t dataset_seed, std::size_t alpha_index)
{
    return derive_trial_stream(dataset_seed, kSweepSeedTag + alpha_index).next_u64();
}

std::vector<HotHandSweepRow> hot_hand_sweep(const HotHandSweepConfig& config)
{
    const std::size_t n_alpha = config.alphas.size();
    std::vector<HotHandSweepRow> rows(n_alpha);
    for (std::size_t i = 0; i < n_alpha; ++i) {
        rows[i].alpha = config.alphas[i];
        rows[i].null_probability.assign(config.n_datasets, 0.0);
    }
    parallel_for(n_alpha * config.n_datasets, config.resampling.workers, [&](std::size_t cell) {
        const std::size_t i = cell / config.n_datasets;
        const std::size_t s = cell % config.n_datasets;
        const std::uint64_t seed = config.first_seed + s;
        const std::vector<GameRecord> games = simulate_games(seed, config.alphas[i], config.n_games);
        HotHandConfig run = config.resampling;
        run.workers = 1;
        run.master_seed = sweep_master_seed(seed, i);
        rows[i].null_probability[s] = hot_hand_resample(games, run).posterior.probability(kNullModel);
    });
    for (HotHandSweepRow& row : rows) {
        double total = 0.0;
        for (double p : row.null_probability) {
            total += p;
        }
        row.acceptance = row.null_probability.empty() ? 0.0 : total / static_cast<double>(row.null_probability.size());
    }
    return rows;
}

std::vector<GameRecord> read_games_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("games CSV is empty");
    }
    std::vector<GameRecord> games;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        const std::string where = "line " + std::to_string(line_number) + ": ";
        if (comma == std::string::npos) {
            throw std::invalid_argument(where + "expected shots,made");
        }
        GameRecord game;
        try {
            std::size_t used = 0;
            game.shots = std::stoull(line.substr(0, comma), &used);
            game.made = std::stoull(line.substr(comma + 1), &used);
        } catch (const std::exception&) {
            throw std::invalid_argument(where + "expected two nonnegative integers");
        }
        try {
            validate(game);
        } catch (const std::domain_error& error) {
            throw std::invalid_argument(where + error.what());
        }
        games.push_back(game);
    }
    return games;
}

} // namespace predres
