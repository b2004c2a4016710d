// SPDX-License-Identifier: Apache-2.0
#include "predres/hypothesis_normal.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_TwoSidedTrial(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::vector<double> data = predres::simulate_normal_data(1, 1, n, 0.1);
    const auto problem = predres::two_sided_problem(0.0);
    const predres::NormalSample sample = predres::NormalSample::from(data);
    predres::ResamplingConfig config;
    config.n_observed = n;
    config.n_final = 21 * n;
    std::uint64_t trial = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            predres::run_trial(problem, sample, config, predres::derive_trial_stream(3, trial), trial));
        ++trial;
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 20 * n));
}
BENCHMARK(BM_TwoSidedTrial)->Arg(30)->Arg(1000);

void BM_ZTestAndEValue(benchmark::State& state)
{
    const std::vector<double> data = predres::simulate_normal_data(1, 0, 1000, 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(predres::z_test_p_value(0.0, data));
        benchmark::DoNotOptimize(predres::e_value(data, 0.1));
    }
}
BENCHMARK(BM_ZTestAndEValue);

} // namespace
