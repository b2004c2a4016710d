// SPDX-License-Identifier: Apache-2.0
#include "predres/linear_selection.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

namespace {

void BM_StackedBic(benchmark::State& state)
{
    const predres::RegressionData data = predres::sparse_linear_data(1, 100);
    const predres::StackedStats stats = predres::StackedStats::from_data(data);
    const predres::SubsetModel subset{{0, 1, 2, 3, 4, 5}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(predres::stacked_bic(stats, subset, 100));
    }
}
BENCHMARK(BM_StackedBic);

void BM_ForwardStepwise(benchmark::State& state)
{
    const predres::RegressionData data = predres::sparse_linear_data(1, 100);
    const predres::StackedStats stats = predres::StackedStats::from_data(data);
    std::vector<std::size_t> columns(20);
    std::iota(columns.begin(), columns.end(), std::size_t{1});
    for (auto _ : state) {
        benchmark::DoNotOptimize(predres::forward_stepwise(stats, columns, predres::SelectionRule::Bic, 100));
    }
}
BENCHMARK(BM_ForwardStepwise);

} // namespace
