#include <benchmark/benchmark.h>

#include "stq/protocols.hpp"
#include "stq/verify.hpp"

using namespace stq;

namespace {

Matrix random_hermitian(int dim, std::uint64_t seed) {
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            m(i, j) = cdouble(uniform_u01(seed) - 0.5, uniform_u01(seed) - 0.5);
    return 0.5 * (m + Matrix(m.adjoint()));
}

void bm_evolve(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Operator h(qubit_labels(n), random_hermitian(1 << n, 17));
    for (auto _ : state) {
        benchmark::DoNotOptimize(evolve(h, 1.3));
    }
}
BENCHMARK(bm_evolve)->Arg(2)->Arg(4)->Arg(8);

void bm_teleport_enumeration(benchmark::State& state) {
    GradientProtocolParams p;
    for (auto _ : state) {
        auto branches = enumerate_branches([&](OutcomeSource& src) {
            return teleport_rotation(gates::bloch(0.7, 0.4), 1.9, p, src);
        });
        benchmark::DoNotOptimize(branches);
    }
}
BENCHMARK(bm_teleport_enumeration);

void bm_square_gate_branches(benchmark::State& state) {
    for (auto _ : state) {
        auto branches = enumerate_branches([&](OutcomeSource& src) {
            return square_gate(gates::bloch(0.3, 0.1), gates::bloch(1.2, 2.4), 1, 1, src);
        });
        benchmark::DoNotOptimize(branches);
    }
}
BENCHMARK(bm_square_gate_branches);

void bm_two_qubit_sequence(benchmark::State& state) {
    for (auto _ : state) {
        OutcomeSource src = OutcomeSource::sampled(42);
        auto r = two_qubit_sequence(gates::bloch(0.3, 0.1), gates::bloch(1.2, 2.4), src);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(bm_two_qubit_sequence);

void bm_leakage_scan_point(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(leakage_scan({0.05}, 1.0, 20));
    }
}
BENCHMARK(bm_leakage_scan_point);

} // namespace

BENCHMARK_MAIN();
