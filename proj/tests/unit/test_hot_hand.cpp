#include "predres/hot_hand.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace predres;

namespace {

// Beta-binomial log-pmf from the ratio of Beta functions, via std::lgamma.
double reference_log_pmf(std::uint64_t k, std::uint64_t n, double a, double b)
{
    auto lbeta = [](double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); };
    const double choose = std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) - std::lgamma(double(n - k) + 1);
    return choose + lbeta(double(k) + a, double(n - k) + b) - lbeta(a, b);
}

double reference_log_likelihood(std::span<const GameRecord> games, double a, double b)
{
    double total = 0.0;
    for (const GameRecord& g : games) {
        total += reference_log_pmf(g.made, g.shots, a, b);
    }
    return total;
}

std::vector<GameRecord> random_games(RngStream& stream, std::size_t count)
{
    std::vector<GameRecord> games(count);
    for (GameRecord& g : games) {
        g.shots = 1 + stream.uniform_index(20);
        g.made = stream.uniform_index(g.shots + 1);
    }
    return games;
}

} // namespace

TEST_CASE("null log-likelihood examples")
{
    const std::vector<GameRecord> one_of_one{{1, 1}};
    CHECK(std::abs(null_log_likelihood(one_of_one) - std::log(0.5)) < 1e-14);
    const std::vector<GameRecord> one_of_two{{2, 1}};
    CHECK(std::abs(null_log_likelihood(one_of_two) - std::log(1.0 / 3.0)) < 1e-14);
    CHECK_THROWS(null_log_likelihood(std::vector<GameRecord>{}));
}

TEST_CASE("null equals the alternative at (1, 1) exactly")
{
    RngStream stream(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto games = random_games(stream, 1 + stream.uniform_index(40));
        CHECK(alt_log_likelihood(games, 1.0, 1.0) == null_log_likelihood(games));
    }
}

TEST_CASE("alternative log-likelihood")
{
    RngStream stream(2);
    const auto games = random_games(stream, 30);
    CHECK(std::abs(alt_log_likelihood(games, 2.5, 0.7) - reference_log_likelihood(games, 2.5, 0.7)) < 1e-10);
    CHECK_THROWS_AS(alt_log_likelihood(games, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(alt_log_likelihood(games, 1.0, -1.0), std::domain_error);

    auto shuffled = games;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 7, shuffled.end());
    CHECK(std::abs(alt_log_likelihood(shuffled, 0.4, 3.0) - alt_log_likelihood(games, 0.4, 3.0)) < 1e-11);

    const std::vector<GameRecord> steady(20, GameRecord{10, 5});
    double previous = -INFINITY;
    for (double s : {1.0, 10.0, 100.0, 1000.0}) {
        const double ll = alt_log_likelihood(steady, s, s);
        CHECK(ll > previous);
        previous = ll;
    }
    CHECK_THROWS_AS(validate(GameRecord{0, 0}), std::domain_error);
    CHECK_THROWS_AS(validate(GameRecord{3, 4}), std::domain_error);
}

TEST_CASE("counts evaluator matches the per-game sum")
{
    RngStream stream(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto games = random_games(stream, 1 + stream.uniform_index(60));
        const BetaBinomialCounts counts(games);
        CHECK(counts.n_games() == games.size());
        for (auto [a, b] : {std::pair{1.0, 1.0}, std::pair{1e-4, 3.0}, std::pair{0.3, 0.3}, std::pair{50.0, 1e4}}) {
            const double expected = alt_log_likelihood(games, a, b);
            CHECK(std::abs(counts.log_likelihood(a, b) - expected) < 1e-9 * (1.0 + std::abs(expected)));
        }
    }
    const std::vector<GameRecord> extreme{{4, 0}, {3, 3}, {1, 1}};
    CHECK(BetaBinomialCounts(extreme).all_extreme());
    const std::vector<GameRecord> mixed{{4, 0}, {3, 2}};
    CHECK_FALSE(BetaBinomialCounts(mixed).all_extreme());
}

TEST_CASE("fit_ab dominates (1, 1) and the grid")
{
    RngStream stream(4);
    const double lo = std::log(1e-2);
    const double hi = std::log(1e3);
    for (int trial = 0; trial < 40; ++trial) {
        const auto games = simulate_games(trial + 1, 0.3 + 3.0 * stream.uniform(), 20);
        const BetaBinFit fit = fit_ab(games);
        double grid_best = alt_log_likelihood(games, 1.0, 1.0);
        for (int i = 0; i < 11; ++i) {
            for (int j = 0; j < 11; ++j) {
                grid_best = std::max(grid_best, reference_log_likelihood(games, std::exp(lo + (hi - lo) * i / 10),
                                                                         std::exp(lo + (hi - lo) * j / 10)));
            }
        }
        CHECK(fit.log_likelihood >= grid_best - 1e-9);
        CHECK(fit.log_likelihood >= null_log_likelihood(games) - 1e-12);
        CHECK(std::abs(fit.log_likelihood - alt_log_likelihood(games, fit.a_hat, fit.b_hat)) < 1e-9);
        CHECK(fit.a_hat >= kMinShape);
        CHECK(fit.a_hat <= kMaxShape);
        CHECK(fit.b_hat >= kMinShape);
        CHECK(fit.b_hat <= kMaxShape);
        const BetaBinFit warm = refine_ab(BetaBinomialCounts(games), fit.a_hat, fit.b_hat);
        CHECK(warm.log_likelihood >= fit.log_likelihood - 1e-9);
    }
}

TEST_CASE("fit_ab recovers generating shapes")
{
    int close = 0;
    constexpr int seeds = 30;
    for (int s = 1; s <= seeds; ++s) {
        const BetaBinFit fit = fit_ab(simulate_games(s, 2.5, 200));
        close += std::abs(fit.a_hat - 2.5) <= 1.0 && std::abs(fit.b_hat - 2.5) <= 1.0;
    }
    CHECK(close >= 0.8 * seeds);
}

TEST_CASE("constant-rate data pushes a + b large")
{
    const std::vector<GameRecord> steady(30, GameRecord{100, 40});
    const BetaBinFit fit = fit_ab(steady);
    CHECK(fit.a_hat + fit.b_hat >= 100.0);
    CHECK(std::abs(fit.a_hat / (fit.a_hat + fit.b_hat) - 0.4) < 0.01);
}

TEST_CASE("all-extreme games give an unconverged boundary fit")
{
    const std::vector<GameRecord> games{{5, 0}, {7, 7}, {3, 0}, {4, 4}};
    const BetaBinFit fit = fit_ab(games);
    CHECK_FALSE(fit.converged);
    CHECK(fit.log_likelihood >= null_log_likelihood(games));
    const std::vector<GameRecord> zeros{{5, 0}, {7, 0}, {3, 0}};
    CHECK_FALSE(fit_ab(zeros).converged);
}

TEST_CASE("selection reduces to the BIC gap")
{
    const auto problem = hot_hand_problem();
    RngStream stream(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto games = simulate_games(trial + 1, 0.3 + 3.0 * stream.uniform(), 2 + stream.uniform_index(60));
        const GameSet data = GameSet::from(games);
        const Selection s = select_best(std::span(problem.models), data, problem.criterion);
        const double gap = 2.0 * (fit_ab(games).log_likelihood - null_log_likelihood(games));
        const bool alternative = gap > std::log(double(games.size()));
        if (std::abs(gap - std::log(double(games.size()))) > 1e-8) {
            CHECK(s.index == (alternative ? kBetaBinomialModel : kNullModel));
        }
    }
}

TEST_CASE("imputed games draw shot counts from the observed games")
{
    const std::vector<GameRecord> games{{5, 2}, {9, 4}, {12, 11}, {5, 0}};
    auto problem = hot_hand_problem();
    std::vector<GameRecord> imputed;
    const auto append = problem.append;
    problem.append = [&](GameSet& data, GameRecord&& game) {
        imputed.push_back(game);
        append(data, std::move(game));
    };
    const ResamplingConfig config{.n_observed = 4, .n_final = 200, .n_trials = 10, .master_seed = 3};
    const ResamplingResult r = run_resampling(problem, GameSet::from(games), config);
    CHECK(imputed.size() == 196 * 10);
    const std::set<std::uint64_t> allowed{5, 9, 12};
    for (const GameRecord& g : imputed) {
        CHECK(allowed.count(g.shots) == 1);
        CHECK(g.made <= g.shots);
    }
    CHECK(r.posterior.n_trials == 10);
}

TEST_CASE("null sampling is uniform on made shots")
{
    const auto problem = hot_hand_problem();
    const std::vector<GameRecord> games{{4, 1}, {4, 3}};
    const FittedModel null_fit = problem.models[kNullModel].fit(GameSet::from(games));
    RngStream stream(6);
    std::vector<int> counts(5, 0);
    constexpr int draws = 50000;
    for (int i = 0; i < draws; ++i) {
        const GameRecord g = problem.models[kNullModel].sample_next(null_fit, stream);
        CHECK(g.shots == 4);
        ++counts[g.made];
    }
    for (int c : counts) {
        CHECK(std::abs(double(c) / draws - 0.2) < 4 * std::sqrt(0.2 * 0.8 / draws));
    }
}

TEST_CASE("hot hand resampling")
{
    const auto games = simulate_games(7, 1.0);
    CHECK(games.size() == 20);
    for (const GameRecord& g : games) {
        CHECK(g.shots >= 5);
        CHECK(g.shots <= 15);
    }
    HotHandConfig config{.n_total_games = 60, .n_trials = 16, .master_seed = 2};
    const ResamplingResult a = hot_hand_resample(games, config);
    config.workers = 4;
    const ResamplingResult b = hot_hand_resample(games, config);
    CHECK(a.posterior.probabilities == b.posterior.probabilities);
    CHECK(std::abs(a.posterior.probability(kNullModel) + a.posterior.probability(kBetaBinomialModel) - 1.0) < 1e-12);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(a.traces[i].selected_path == b.traces[i].selected_path);
        CHECK(a.traces[i].selected_path.size() == 41);
    }
    CHECK_THROWS_AS(hot_hand_resample(std::vector<GameRecord>{{3, 1}}, config), std::invalid_argument);
}

TEST_CASE("sweep layout and determinism")
{
    HotHandSweepConfig config;
    config.alphas = {0.5, 2.5};
    config.n_datasets = 3;
    config.resampling.n_total_games = 40;
    config.resampling.n_trials = 8;
    const auto rows = hot_hand_sweep(config);
    config.resampling.workers = 3;
    const auto again = hot_hand_sweep(config);
    REQUIRE(rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(rows[i].null_probability.size() == 3);
        CHECK(rows[i].null_probability == again[i].null_probability);
        double mean = 0.0;
        for (double p : rows[i].null_probability) {
            mean += p / 3.0;
        }
        CHECK(std::abs(rows[i].acceptance - mean) < 1e-15);
    }
    CHECK(sweep_master_seed(1, 0) != sweep_master_seed(1, 1));
    CHECK(sweep_master_seed(1, 0) != sweep_master_seed(2, 0));
}

TEST_CASE("games CSV")
{
    std::istringstream in("shots,made\n10,4\r\n\n3,3\n");
    const auto games = read_games_csv(in);
    REQUIRE(games.size() == 2);
    CHECK(games[0].shots == 10);
    CHECK(games[0].made == 4);
    std::istringstream bad("shots,made\n3,5\n");
    CHECK_THROWS_WITH_AS(read_games_csv(bad), doctest::Contains("line 2"), std::invalid_argument);
    std::istringstream junk("shots,made\nten,4\n");
    CHECK_THROWS_AS(read_games_csv(junk), std::invalid_argument);
}
