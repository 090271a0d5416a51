#include <benchmark/benchmark.h>

#include "ergolab/cell.hpp"
#include "ergolab/lp.hpp"
#include "ergolab/measure.hpp"

using namespace ergolab;

namespace {
HamiltonianModel pendulum() { return HamiltonianModel::make_mechanical(1, 2, 1.0); }
}  // namespace

static void BM_solve_cell(benchmark::State& state) {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto sol = solve_cell(m, g, Vec::Zero(), 0.2);
        benchmark::DoNotOptimize(sol.c);
    }
}
BENCHMARK(BM_solve_cell)->Arg(128)->Arg(256)->Arg(512);

static void BM_invariant_density(benchmark::State& state) {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(static_cast<int>(state.range(0)));
    const auto sol = solve_cell(m, g, Vec::Zero(), 0.2);
    for (auto _ : state) {
        auto mu = invariant_density(m, sol);
        benchmark::DoNotOptimize(mu.theta()[0]);
    }
}
BENCHMARK(BM_invariant_density)->Arg(256)->Arg(512);

static void BM_holonomic_lp(benchmark::State& state) {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(32);
    const VGridSpec vspec{3.0, static_cast<int>(state.range(0))};
    for (auto _ : state) {
        const auto lp = HolonomicLP::build(m, g, vspec, Vec::Zero(), 0.2);
        auto res = solve_lp(lp);
        benchmark::DoNotOptimize(res.value);
    }
}
BENCHMARK(BM_holonomic_lp)->Arg(17)->Arg(33);

BENCHMARK_MAIN();
