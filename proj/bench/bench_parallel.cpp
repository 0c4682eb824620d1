// Serial vs OpenMP comparison for the data-parallel kernels: POVM row
// construction, click simulation, and bootstrap replicates.

#include <benchmark/benchmark.h>

#include "tptomo/povm.hpp"
#include "tptomo/reconstruction.hpp"
#include "tptomo/simulator.hpp"

using namespace tptomo;

namespace {

SchemeParams default_params(int cutoff) {
    SchemeParams p;
    p.eta = 0.15;
    p.transmissivity = 0.9;
    p.overlap = 0.45;
    p.signal_cutoff = cutoff;
    return p;
}

std::vector<ProbeSetting> linspace_settings(int count, double lo, double hi) {
    std::vector<ProbeSetting> s;
    for (int i = 0; i < count; ++i)
        s.push_back({i, lo + (hi - lo) * i / std::max(1, count - 1)});
    return s;
}

void bm_povm(benchmark::State& state, Execution exec) {
    const SchemeParams p = default_params(static_cast<int>(state.range(1)));
    const auto settings = linspace_settings(static_cast<int>(state.range(0)), 0.0, 150.0);
    for (auto _ : state) {
        auto povm = povm_bs_overlap(p, settings, exec);
        benchmark::DoNotOptimize(povm.elements.data());
    }
}

void bm_simulate(benchmark::State& state, Execution exec) {
    ExperimentPlan plan;
    plan.params = default_params(3);
    plan.true_state = PhotonDistribution({0.095, 0.905, 0.0, 0.0});
    plan.settings = linspace_settings(static_cast<int>(state.range(0)), 0.0, 150.0);
    plan.pulses_per_setting = 1000000;
    plan.seed = 1;
    for (auto _ : state) {
        auto records = simulate_clicks(plan, exec);
        benchmark::DoNotOptimize(records.data());
    }
}

void bm_bootstrap(benchmark::State& state, Execution exec) {
    ExperimentPlan plan;
    plan.params = default_params(3);
    plan.true_state = PhotonDistribution({0.095, 0.905, 0.0, 0.0});
    plan.settings = linspace_settings(150, 0.0, 150.0);
    plan.pulses_per_setting = 1000000;
    plan.seed = 1;
    const auto records = simulate_clicks(plan);
    for (auto _ : state) {
        auto bs = bootstrap(records, plan.settings, plan.params, PovmModel::ImperfectOverlap, {},
                            static_cast<int>(state.range(0)), 7, exec);
        benchmark::DoNotOptimize(bs.mean.data());
    }
}

}  // namespace

BENCHMARK_CAPTURE(bm_povm, serial, Execution::Serial)->Args({150, 3})->Args({600, 6});
BENCHMARK_CAPTURE(bm_povm, openmp, Execution::Parallel)->Args({150, 3})->Args({600, 6});
BENCHMARK_CAPTURE(bm_simulate, serial, Execution::Serial)->Arg(150);
BENCHMARK_CAPTURE(bm_simulate, openmp, Execution::Parallel)->Arg(150);
BENCHMARK_CAPTURE(bm_bootstrap, serial, Execution::Serial)->Arg(100);
BENCHMARK_CAPTURE(bm_bootstrap, openmp, Execution::Parallel)->Arg(100);

BENCHMARK_MAIN();
