#include <benchmark/benchmark.h>

#include <qoc/costs.hpp>
#include <qoc/filter_functions.hpp>
#include <qoc/solvers.hpp>

using namespace qoc;

namespace {

CMatrix random_hermitian(Rng &rng, Eigen::Index d) {
  CMatrix a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = complex(rng.normal(), rng.normal());
  return 0.5 * (a + a.adjoint());
}

HamiltonianSpec random_spec(Rng &rng, Eigen::Index d) {
  HamiltonianSpec spec;
  spec.controls = {Operator(random_hermitian(rng, d)), Operator(random_hermitian(rng, d))};
  spec.drift.emplace_back(random_hermitian(rng, d));
  return spec;
}

PulseMatrix random_pulse(Rng &rng, Eigen::Index n_t) {
  RMatrix x(n_t, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  return PulseMatrix(x, RVector::Constant(n_t, 0.1));
}

void BM_Expm(benchmark::State &state) {
  Rng rng(1);
  const CMatrix a = complex(0, -1) * random_hermitian(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expm(a));
}
BENCHMARK(BM_Expm)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_ExpmHermitian(benchmark::State &state) {
  Rng rng(1);
  const CMatrix h = random_hermitian(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expm_hermitian(h, complex(0, -0.1)));
}
BENCHMARK(BM_ExpmHermitian)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_ExpmFrechet(benchmark::State &state) {
  Rng rng(2);
  const CMatrix a = complex(0, -1) * random_hermitian(rng, state.range(0));
  const CMatrix e = complex(0, -1) * random_hermitian(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expm_frechet(a, e));
}
BENCHMARK(BM_ExpmFrechet)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_PropagateWithGradients(benchmark::State &state) {
  Rng rng(3);
  const HamiltonianSpec spec = random_spec(rng, state.range(0));
  const PulseMatrix u = random_pulse(rng, state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(propagate_closed_with_gradients(spec, u));
}
BENCHMARK(BM_PropagateWithGradients)->Args({2, 20})->Args({4, 20})->Args({4, 100});

void BM_OperationInfidelityGradient(benchmark::State &state) {
  Rng rng(4);
  const Eigen::Index d = state.range(0);
  const HamiltonianSpec spec = random_spec(rng, d);
  const PulseMatrix u = random_pulse(rng, 50);
  const OperationInfidelity cost(spec, Operator(CMatrix::Identity(d, d)));
  for (auto _ : state) benchmark::DoNotOptimize(cost.evaluate(u, true));
}
BENCHMARK(BM_OperationInfidelityGradient)->Arg(2)->Arg(4);

void BM_Lindblad(benchmark::State &state) {
  Rng rng(5);
  const Eigen::Index d = state.range(0);
  const HamiltonianSpec spec = random_spec(rng, d);
  const LindbladSpec lind{{Operator(random_hermitian(rng, d))}, {LindbladRate{0.1}}};
  const PulseMatrix u = random_pulse(rng, 20);
  for (auto _ : state) benchmark::DoNotOptimize(propagate_lindblad(spec, lind, u));
}
BENCHMARK(BM_Lindblad)->Arg(2)->Arg(4);

void BM_FilterFunction(benchmark::State &state) {
  Rng rng(6);
  const HamiltonianSpec spec = random_spec(rng, 2);
  const PulseMatrix u = random_pulse(rng, state.range(0));
  const auto rec = propagate_closed(spec, u);
  const auto grid = FrequencyGrid::log_spaced(1e-2, 1e2, state.range(1));
  const std::vector<FilterNoise> noise{{pauli(Pauli::z), {}}};
  for (auto _ : state) benchmark::DoNotOptimize(compute_filter_function(rec, noise, grid));
}
BENCHMARK(BM_FilterFunction)->Args({20, 200})->Args({100, 200})->Args({100, 1000});

}  // namespace

BENCHMARK_MAIN();
