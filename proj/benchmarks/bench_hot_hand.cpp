// SPDX-License-Identifier: Apache-2.0
#include "predres/hot_hand.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_FitAbCold(benchmark::State& state)
{
    const std::vector<predres::GameRecord> games = predres::simulate_games(4, 2.5, 200);
    const predres::BetaBinomialCounts counts(games);
    for (auto _ : state) {
        benchmark::DoNotOptimize(predres::fit_ab(counts));
    }
}
BENCHMARK(BM_FitAbCold);

void BM_FitAbWarm(benchmark::State& state)
{
    const std::vector<predres::GameRecord> games = predres::simulate_games(4, 2.5, 200);
    const predres::BetaBinomialCounts counts(games);
    const predres::BetaBinFit start = predres::fit_ab(counts);
    for (auto _ : state) {
        benchmark::DoNotOptimize(predres::refine_ab(counts, start.a_hat, start.b_hat));
    }
}
BENCHMARK(BM_FitAbWarm);

void BM_CountsLogLikelihood(benchmark::State& state)
{
    const predres::BetaBinomialCounts counts(predres::simulate_games(4, 2.5, 200));
    for (auto _ : state) {
        benchmark::DoNotOptimize(counts.log_likelihood(2.5, 2.5));
    }
}
BENCHMARK(BM_CountsLogLikelihood);

} // namespace
