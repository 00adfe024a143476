#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cqed/kernels.hpp"
#include "cqed/lindblad.hpp"
#include "cqed/modespace.hpp"
#include "cqed/parallel.hpp"
#include "cqed/spectra.hpp"

using namespace cqed;

namespace {

Generator busy_generator(int n_max) {
    SystemParams p = default_system();
    p.pump.cw_rate = 3e8;
    p.pump.cavity_rate = 2e8;
    p.emitter.dephasing = 1e9;
    Generator gen = make_generator(HilbertSpec{n_max}, p, p.target.omega);
    gen.update(p.fp.omega - 2e11, p.fp.kappa, p.pump.cw_rate);
    return gen;
}

Eigen::MatrixXcd random_rho(int d) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXcd a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {n(rng), n(rng)};
    Eigen::MatrixXcd rho = a * a.adjoint();
    return rho / rho.trace();
}

void BM_generator(benchmark::State& state, bool parallel) {
    const Generator gen = busy_generator(static_cast<int>(state.range(0)));
    const Eigen::MatrixXcd rho = random_rho(gen.dim);
    Eigen::MatrixXcd out(gen.dim, gen.dim);
    for (auto _ : state) {
        apply_generator(gen, rho.data(), out.data(), parallel);
        benchmark::DoNotOptimize(out.data());
    }
    state.counters["dim"] = gen.dim;
}

void BM_generator_parallel(benchmark::State& s) { BM_generator(s, true); }
void BM_generator_serial(benchmark::State& s) { BM_generator(s, false); }

void BM_generator_dense_reference(benchmark::State& state) {
    const Generator gen = busy_generator(static_cast<int>(state.range(0)));
    const Eigen::MatrixXcd rho = random_rho(gen.dim);
    for (auto _ : state) benchmark::DoNotOptimize(apply_generator_reference(gen, rho));
}

const Trajectory& shared_trajectory() {
    static const Trajectory traj = [] {
        SystemParams p = default_system();
        p.pump.cw_rate = 1e8;
        SolverOptions o;
        o.space.n_max = 2;
        TuningProfile prof;
        prof.pulses.push_back({0.0, 0.6, 450.0, 0.0});
        std::vector<double> t;
        for (int i = 0; i <= 500; ++i) t.push_back(-500.0 + 4.0 * i);
        return evolve(p, prof, steady_state(p, p.fp, o), t, o);
    }();
    return traj;
}

std::vector<double> wavelength_grid() {
    std::vector<double> l;
    for (int i = 0; i <= 600; ++i) l.push_back(1550.5 + 0.005 * i);
    return l;
}

void BM_map_parallel(benchmark::State& state) {
    const Trajectory& traj = shared_trajectory();
    const auto grid = wavelength_grid();
    for (auto _ : state) benchmark::DoNotOptimize(synthesize_map(traj, grid, 1.0, true));
}

void BM_map_reference(benchmark::State& state) {
    const Trajectory& traj = shared_trajectory();
    const auto grid = wavelength_grid();
    for (auto _ : state) benchmark::DoNotOptimize(synthesize_map_reference(traj, grid, 1.0));
}

}  // namespace

BENCHMARK(BM_generator_parallel)->DenseRange(2, 4);
BENCHMARK(BM_generator_serial)->DenseRange(2, 4);
BENCHMARK(BM_generator_dense_reference)->DenseRange(2, 4);
BENCHMARK(BM_map_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_map_reference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
