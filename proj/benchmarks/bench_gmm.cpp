// SPDX-License-Identifier: Apache-2.0
#include "predres/gmm.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_EmFitCold(benchmark::State& state)
{
    const auto g = static_cast<std::size_t>(state.range(0));
    const std::vector<double> data = predres::sample_three_component(7, 200);
    const predres::EmConfig config;
    for (auto _ : state) {
        predres::RngStream stream(11);
        benchmark::DoNotOptimize(predres::em_fit(data, g, false, config, stream));
    }
}
BENCHMARK(BM_EmFitCold)->Arg(1)->Arg(3)->Arg(9);

void BM_EmRefineWarm(benchmark::State& state)
{
    const auto g = static_cast<std::size_t>(state.range(0));
    std::vector<double> data = predres::sample_three_component(7, 200);
    const predres::EmConfig config;
    predres::RngStream stream(11);
    const predres::GmmModel start = predres::em_fit(data, g, false, config, stream).model;
    data.push_back(0.25);
    for (auto _ : state) {
        benchmark::DoNotOptimize(predres::em_refine(data, start, config));
    }
}
BENCHMARK(BM_EmRefineWarm)->Arg(3)->Arg(9);

void BM_DensityStep(benchmark::State& state)
{
    const std::vector<predres::MixtureCandidate> candidates = predres::mixture_candidates(9);
    const auto problem = predres::density_problem(candidates, {});
    predres::MixtureData data;
    data.values = predres::sample_three_component(3, 50);
    const std::span<const predres::CandidateModel<predres::MixtureData, double>> models(problem.models);
    predres::RngStream stream(5);
    for (auto _ : state) {
        const predres::Selection best = predres::select_best(models, data, problem.criterion);
        problem.append(data, problem.models[best.index].sample_next(best.fitted, stream));
        if (data.size() > 650) {
            data.values.resize(50);
            data.warm_start.clear();
        }
    }
}
BENCHMARK(BM_DensityStep);

} // namespace
