// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "gumbolt/kernels.hpp"
#include "gumbolt/rbm.hpp"

namespace {

using namespace gumbolt;

Rbm bench_rbm(std::size_t n1, std::size_t n2) {
  Rng rng(11);
  return Rbm::random(n1, n2, 0.5, 0.5, rng);
}

template <auto Sweep>
void gibbs(benchmark::State& state) {
  const auto units = static_cast<std::size_t>(state.range(0));
  const Rbm rbm = bench_rbm(units, units);
  PcdChains chains(static_cast<std::size_t>(state.range(1)), units, units, 3);
  for (auto _ : state) {
    Sweep(rbm, 1.0, chains.z1, chains.z2, std::span<Rng>(chains.rngs));
    benchmark::DoNotOptimize(chains.z1.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

template <auto LogZ>
void log_partition(benchmark::State& state) {
  const Rbm rbm = bench_rbm(static_cast<std::size_t>(state.range(0)), 16);
  for (auto _ : state) benchmark::DoNotOptimize(LogZ(rbm));
}

template <auto Relaxed>
void relaxed(benchmark::State& state) {
  const Rbm rbm = bench_rbm(3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Relaxed(rbm, 1 << 16, 5));
}

}  // namespace

BENCHMARK(gibbs<kernels::serial::gibbs_sweep>)->Name("gibbs_sweep/serial")->Args({8, 100})->Args({100, 100});
BENCHMARK(gibbs<kernels::omp::gibbs_sweep>)->Name("gibbs_sweep/omp")->Args({8, 100})->Args({100, 100});
BENCHMARK(log_partition<kernels::serial::log_partition>)->Name("log_partition/serial")->Arg(12)->Arg(16);
BENCHMARK(log_partition<kernels::omp::log_partition>)->Name("log_partition/omp")->Arg(12)->Arg(16);
BENCHMARK(relaxed<kernels::serial::relaxed_partition>)->Name("relaxed_partition/serial");
BENCHMARK(relaxed<kernels::omp::relaxed_partition>)->Name("relaxed_partition/omp");

BENCHMARK_MAIN();
