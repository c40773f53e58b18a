#include <random>

#include <benchmark/benchmark.h>

#include "emtp2/hr_model.hpp"
#include "emtp2/qp_subproblem.hpp"
#include "emtp2/solver.hpp"

namespace {

emtp2::Variogram sphere(std::size_t d, std::uint64_t rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(rep)};
    std::mt19937_64 rng(seq);
    return emtp2::random_sphere_variogram(d, rng);
}

void BM_Fit(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    emtp2::FitConfig cfg;
    cfg.gap_tol = 1e-5;
    const emtp2::Variogram gbar = sphere(d, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(emtp2::fit(gbar, cfg));
    }
}
BENCHMARK(BM_Fit)->Arg(10)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_GammaToTheta(benchmark::State& state) {
    const emtp2::Variogram g = sphere(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(emtp2::gamma_to_theta(g));
    }
}
BENCHMARK(BM_GammaToTheta)->Arg(20)->Arg(100);

void BM_RowUpdate(benchmark::State& state) {
    const emtp2::Variogram gbar = sphere(static_cast<std::size_t>(state.range(0)), 2);
    const emtp2::Variogram g0 = emtp2::initial_point(gbar);
    const emtp2::FitConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(emtp2::row_update(g0, gbar, 0, cfg));
    }
}
BENCHMARK(BM_RowUpdate)->Arg(20)->Arg(100);

void BM_SimulatePareto(benchmark::State& state) {
    const emtp2::HRModel model(sphere(10, 3));
    for (auto _ : state) {
        benchmark::DoNotOptimize(emtp2::simulate_pareto(model, static_cast<std::size_t>(state.range(0)), 1));
    }
}
BENCHMARK(BM_SimulatePareto)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
