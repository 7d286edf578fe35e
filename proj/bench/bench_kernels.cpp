// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include <random>

#include "toolwatch/dataset.hpp"
#include "toolwatch/evaltune.hpp"
#include "toolwatch/explain.hpp"
#include "toolwatch/features.hpp"
#include "toolwatch/knn.hpp"

using namespace toolwatch;

namespace {

Execution exec_of(const benchmark::State& state) {
    return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

const std::vector<dataset::Window>& windows() {
    static const auto w = [] {
        dataset::GeneratorConfig g;
        g.classes = {{{150, 10, 0, 0.3}, {150, 11, 0.35, 0.3}, {150, 12, 0.7, 0.3}}};
        g.windows_per_class = 200;
        g.window_length = 1024;
        g.rng_seed = 3;
        std::vector<dataset::Window> out;
        for (const auto& s : dataset::synthesize(g)) {
            auto part = dataset::make_windows(s, g.window_length, g.window_length);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }();
    return w;
}

const features::FeatureTable& table() {
    static const auto t = features::build_table(windows(), Execution::serial);
    return t;
}

void BM_BuildTable(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(features::build_table(windows(), exec_of(state)));
}

void BM_PredictTable(benchmark::State& state) {
    const auto model = knn::fit(table(), {5, knn::Metric::euclidean(), knn::Weighting::uniform});
    for (auto _ : state) benchmark::DoNotOptimize(knn::predict_table(model, table(), exec_of(state)));
}

void BM_GridSearch(benchmark::State& state) {
    auto grid = evaltune::GridSpec::defaults();
    grid.n_neighbors = {1, 3, 5, 7};
    for (auto _ : state) benchmark::DoNotOptimize(evaltune::grid_search(table(), grid, 42, exec_of(state)));
}

void BM_PermutationImportance(benchmark::State& state) {
    const auto model = knn::fit(table(), {4, knn::Metric::manhattan(), knn::Weighting::inverse_distance});
    for (auto _ : state) {
        benchmark::DoNotOptimize(explain::permutation_importance(model, table(), 5, 0, exec_of(state)));
    }
}

}  // namespace

BENCHMARK(BM_BuildTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridSearch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PermutationImportance)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
