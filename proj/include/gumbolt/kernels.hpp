#pragma once

// Data-parallel inner loops. Each kernel exists as a plain serial reference
// and an OpenMP version; both produce bit-identical results because work is
// split into fixed blocks with their own random streams and partial results
// are merged in block order.

#include <cstddef>
#include <cstdint>
#include <span>

#include "gumbolt/rbm.hpp"

namespace gumbolt::kernels {

/// Running mean and standard error of a Monte-Carlo integral.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

inline constexpr std::size_t kMcBlock = 1 << 14;

namespace serial {

void gibbs_sweep(const Rbm& rbm, double beta, Tensor& z1, Tensor& z2, std::span<Rng> rngs);
// Energies of every chain state, one per row.
void chain_energies(const Rbm& rbm, const Tensor& z1, const Tensor& z2, std::span<double> out);
double log_partition(const Rbm& rbm);
// Integral of exp(-E(zeta)) over the unit hypercube with uniform samples.
McEstimate relaxed_partition(const Rbm& rbm, std::size_t samples, std::uint64_t seed);

}  // namespace serial

namespace omp {

void gibbs_sweep(const Rbm& rbm, double beta, Tensor& z1, Tensor& z2, std::span<Rng> rngs);
void chain_energies(const Rbm& rbm, const Tensor& z1, const Tensor& z2, std::span<double> out);
double log_partition(const Rbm& rbm);
McEstimate relaxed_partition(const Rbm& rbm, std::size_t samples, std::uint64_t seed);

}  // namespace omp

}  // namespace gumbolt::kernels
