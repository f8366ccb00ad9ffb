#pragma once

// Per-item bodies shared by the serial and OpenMP kernel loops.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gumbolt/numeric.hpp"
#include "gumbolt/rbm.hpp"

namespace gumbolt::kernels::detail {

inline Rng block_rng(std::uint64_t seed, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                    0x6b62u};
  return Rng(seq);
}

// Top 53 bits of one draw; the same stream on every standard library.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline void gibbs_chain(const Rbm& rbm, double beta, double* z1, double* z2, Rng& rng) {
  const std::size_t n1 = rbm.n1(), n2 = rbm.n2();
  const double* w = rbm.W.data();
  for (std::size_t j = 0; j < n2; ++j) {
    double act = rbm.b[j];
    const double* wr = w + j * n1;
    for (std::size_t i = 0; i < n1; ++i) act += wr[i] * z1[i];
    z2[j] = uniform01(rng) < sigmoid(beta * act) ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < n1; ++i) {
    double act = rbm.a[i];
    for (std::size_t j = 0; j < n2; ++j) act += w[j * n1 + i] * z2[j];
    z1[i] = uniform01(rng) < sigmoid(beta * act) ? 1.0 : 0.0;
  }
}

inline double chain_energy(const Rbm& rbm, const double* z1, const double* z2) {
  const std::size_t n1 = rbm.n1(), n2 = rbm.n2();
  double neg = 0.0;
  for (std::size_t i = 0; i < n1; ++i) neg += rbm.a[i] * z1[i];
  for (std::size_t j = 0; j < n2; ++j) {
    if (z2[j] == 0.0) continue;
    double act = rbm.b[j];
    const double* wr = rbm.W.data() + j * n1;
    for (std::size_t i = 0; i < n1; ++i) act += wr[i] * z1[i];
    neg += act * z2[j];
  }
  return -neg;
}

// Log of the sum over the non-enumerated layer for one configuration
// (encoded as the bits of `code`) of the enumerated layer.
struct PartitionTerm {
  const Rbm& rbm;
  bool enumerate_first;  // enumerate z1, marginalise z2
  std::size_t n_enum() const { return enumerate_first ? rbm.n1() : rbm.n2(); }

  double operator()(std::uint64_t code, std::vector<double>& scratch) const {
    const std::size_t n1 = rbm.n1(), n2 = rbm.n2();
    const std::size_t ne = n_enum();
    scratch.resize(ne);
    for (std::size_t k = 0; k < ne; ++k) scratch[k] = static_cast<double>((code >> k) & 1u);
    double s = 0.0;
    if (enumerate_first) {
      for (std::size_t i = 0; i < n1; ++i) s += rbm.a[i] * scratch[i];
      for (std::size_t j = 0; j < n2; ++j) {
        double act = rbm.b[j];
        const double* wr = rbm.W.data() + j * n1;
        for (std::size_t i = 0; i < n1; ++i) act += wr[i] * scratch[i];
        s += softplus(act);
      }
    } else {
      for (std::size_t j = 0; j < n2; ++j) s += rbm.b[j] * scratch[j];
      for (std::size_t i = 0; i < n1; ++i) {
        double act = rbm.a[i];
        for (std::size_t j = 0; j < n2; ++j) act += rbm.W[j * n1 + i] * scratch[j];
        s += softplus(act);
      }
    }
    return s;
  }
};

inline constexpr std::uint64_t kPartitionBlock = 4096;

struct McPartial {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
};

inline McPartial relaxed_block(const Rbm& rbm, std::uint64_t seed, std::uint64_t block,
                               std::size_t count) {
  Rng rng = block_rng(seed, block);
  std::vector<double> v1(rbm.n1()), v2(rbm.n2());
  McPartial p;
  for (std::size_t s = 0; s < count; ++s) {
    for (auto& x : v1) x = uniform01(rng);
    for (auto& x : v2) x = uniform01(rng);
    const double f = std::exp(-energy(rbm, v1, v2));
    p.sum += f;
    p.sum_sq += f * f;
  }
  p.n = count;
  return p;
}

}  // namespace gumbolt::kernels::detail
