// SPDX-License-Identifier: Apache-2.0
//
// Hot hand test: one shooting percentage integrated under a uniform prior
// (null) against game-varying percentages from a fitted Beta(a, b)
// (beta-binomial alternative), resampled one game at a time.
#pragma once

#include "predres/engine.hpp"

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace predres {

struct GameRecord
{
    std::uint64_t shots = 1;
    std::uint64_t made = 0;
};

/// Throws std::domain_error unless shots > 0 and made <= shots.
void validate(const GameRecord& game);

/// sum_i log C(n_i, k_i) + log B(k_i + 1, n_i - k_i + 1) - log B(1, 1).
double null_log_likelihood(std::span<const GameRecord> games);

/// Sum of beta-binomial log-pmfs. Throws std::domain_error unless a, b > 0.
double alt_log_likelihood(std::span<const GameRecord> games, double a, double b);

/// Sufficient statistics of a game list for the beta-binomial likelihood:
///   log L(a, b) = sum_i log C(n_i, k_i)
///               + sum_j [A_j log(a + j) + B_j log(b + j) - C_j log(a + b + j)]
/// with A_j = #{k_i > j}, B_j = #{n_i - k_i > j}, C_j = #{n_i > j}.
/// Evaluation costs O(max n_i) regardless of the number of games.
class BetaBinomialCounts
{
  public:
    BetaBinomialCounts() = default;
    explicit BetaBinomialCounts(std::span<const GameRecord> games);

    void add(const GameRecord& game);
    double log_likelihood(double a, double b) const;

    std::size_t n_games() const noexcept { return n_games_; }
    /// Every game is all makes or all misses.
    bool all_extreme() const noexcept { return n_mixed_ == 0; }

  private:
    std::size_t n_games_ = 0;
    std::size_t n_mixed_ = 0;
    double log_choose_total_ = 0.0;
    std::vector<double> made_above_;
    std::vector<double> missed_above_;
    std::vector<double> shots_above_;
};

/// Optimizer box for a and b.
inline constexpr double kMinShape = 1e-4;
inline constexpr double kMaxShape = 1e4;

struct BetaBinFit
{
    double a_hat = 1.0;
    double b_hat = 1.0;
    double log_likelihood = 0.0;
    bool converged = false;
};

struct NelderMeadOptions
{
    std::size_t max_evaluations = 2000;
    /// Stop when the simplex values and vertices agree to these tolerances.
    double value_tolerance = 1e-10;
    double point_tolerance = 1e-8;
    /// Initial simplex edge in log-shape units.
    double initial_step = 0.5;
};

/// Maximizes log L(a, b) over (log a, log b): best point of an 11 x 11 grid
/// log-spaced over [1e-2, 1e3] and of (1, 1), refined by Nelder-Mead inside
/// [1e-4, 1e4]^2. When every game is all makes or all misses the likelihood
/// has no interior maximum; the boundary point is returned with
/// converged = false.
BetaBinFit fit_ab(std::span<const GameRecord> games, const NelderMeadOptions& options = {});
BetaBinFit fit_ab(const BetaBinomialCounts& counts, const NelderMeadOptions& options = {});

/// Nelder-Mead from (a, b) only, also compared against (1, 1).
BetaBinFit refine_ab(const BetaBinomialCounts& counts, double a, double b, const NelderMeadOptions& options = {});

inline constexpr std::size_t kNullModel = 0;
inline constexpr std::size_t kBetaBinomialModel = 1;

/// Working data of one trial.
struct GameSet
{
    /// Observed shot counts; new games draw their shot count from these.
    std::shared_ptr<const std::vector<double>> observed_shots;
    BetaBinomialCounts counts;
    /// Last fitted (a, b), used to start the next fit.
    mutable std::optional<BetaBinFit> warm_start;

    std::size_t size() const noexcept { return counts.n_games(); }

    static GameSet from(std::span<const GameRecord> games);
};

/// Null (d = 1) against beta-binomial (d = 2) by BIC with m = games.
ResamplingProblem<GameSet, GameRecord> hot_hand_problem();

struct HotHandConfig
{
    std::size_t n_total_games = 200;
    std::size_t n_trials = 100;
    std::uint64_t master_seed = 0;
    std::size_t workers = 1;
};

/// Requires at least two games.
ResamplingResult hot_hand_resample(std::span<const GameRecord> games, const HotHandConfig& config);

/// `n_games` games with shots uniform on [min_shots, max_shots] and made
/// ~ Binomial(shots, p_i), p_i ~ Beta(alpha, alpha).
std::vector<GameRecord> simulate_games(std::uint64_t seed, double alpha, std::size_t n_games = 20,
                                       std::uint64_t min_shots = 5, std::uint64_t max_shots = 15);

struct HotHandSweepConfig
{
    std::vector<double> alphas{0.5, 1.0, 1.5, 2.0, 2.5};
    std::size_t n_datasets = 100;
    std::uint64_t first_seed = 1;
    std::size_t n_games = 20;
    HotHandConfig resampling;
};

struct HotHandSweepRow
{
    double alpha = 0.0;
    /// Mean over datasets of the posterior probability of the null.
    double acceptance = 0.0;
    /// Per dataset, in seed order.
    std::vector<double> null_probability;
};

/// Resampling seed of dataset `dataset_seed` at position `alpha_index` of a
/// sweep.
std::uint64_t sweep_master_seed(std::uint64_t dataset_seed, std::size_t alpha_index);

/// Datasets run in parallel on `resampling.workers`; trials within a
/// dataset run sequentially.
std::vector<HotHandSweepRow> hot_hand_sweep(const HotHandSweepConfig& config);

/// CSV with a header row and columns shots,made.
std::vector<GameRecord> read_games_csv(std::istream& in);

} // namespace predres
