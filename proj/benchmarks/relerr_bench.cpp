#include <benchmark/benchmark.h>

#include <vector>

#include "relerr/cd_engine.hpp"
#include "relerr/sim_engine.hpp"
#include "relerr/solver.hpp"

namespace {

relerr::SimulatedData scenario(std::size_t n, std::size_t p) {
    relerr::ScenarioConfig c;
    c.n = n;
    c.p = p;
    c.n_env_signals = 2;
    c.n_gene_signals = 4;
    c.n_interaction_signals = 8;
    c.seed = 7;
    return relerr::generate_dataset(c);
}

void BM_KaplanMeierWeights(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<int> status(n);
    for (std::size_t i = 0; i < n; ++i) status[i] = (i % 5 == 0) ? 0 : 1;
    for (auto _ : state) benchmark::DoNotOptimize(relerr::kaplan_meier_weights(status));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KaplanMeierWeights)->RangeMultiplier(10)->Range(100, 100000)->Complexity();

void BM_CoordinatePass(benchmark::State& state) {
    const auto sim = scenario(200, static_cast<std::size_t>(state.range(0)));
    const auto design = relerr::build_design(sim.data);
    const auto w = relerr::kaplan_meier_weights(sim.data);
    const auto kind = static_cast<relerr::LossKind>(state.range(1));
    relerr::CoordinateDescent engine(design, sim.data, w, kind, {});
    const double lmax = relerr::lambda_max(design, sim.data, w, kind);
    engine.set_penalty({relerr::PenaltyKind::MCP, 0.3 * lmax, 6.0});
    engine.build_surrogate();
    for (auto _ : state) {
        engine.build_surrogate();
        benchmark::DoNotOptimize(engine.cd_pass(false));
    }
    state.SetLabel(relerr::to_string(kind));
}
BENCHMARK(BM_CoordinatePass)
    ->ArgsProduct({{50, 200}, {0, 1, 2, 3}})
    ->Unit(benchmark::kMillisecond);

void BM_FitPenalized(benchmark::State& state) {
    const auto sim = scenario(200, 50);
    const auto design = relerr::build_design(sim.data);
    const auto w = relerr::kaplan_meier_weights(sim.data);
    const auto kind = static_cast<relerr::LossKind>(state.range(0));
    const double lmax = relerr::lambda_max(design, sim.data, w, kind);
    for (auto _ : state) {
        benchmark::DoNotOptimize(relerr::fit_penalized(design, sim.data, w, kind,
                                                       {relerr::PenaltyKind::MCP, 0.2 * lmax, 6.0}, {}));
    }
    state.SetLabel(relerr::to_string(kind));
}
BENCHMARK(BM_FitPenalized)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_LambdaPath(benchmark::State& state) {
    const auto sim = scenario(200, 50);
    const auto design = relerr::build_design(sim.data);
    const auto w = relerr::kaplan_meier_weights(sim.data);
    relerr::PathOptions opts;
    opts.grid_size = 50;
    for (auto _ : state) {
        benchmark::DoNotOptimize(relerr::lambda_path(design, sim.data, w, relerr::LossKind::LARE,
                                                     relerr::PenaltyKind::MCP, opts, {}));
    }
}
BENCHMARK(BM_LambdaPath)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
