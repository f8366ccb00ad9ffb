#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gumbolt/tensor.hpp"

namespace gumbolt {

using Rng = std::mt19937_64;

/// Bipartite Boltzmann machine with -E(z) = a.z1 + b.z2 + z2^T W z1.
struct Rbm {
  Tensor a;  // [n1]
  Tensor b;  // [n2]
  Tensor W;  // [n2 x n1]

  Rbm() = default;
  Rbm(std::size_t n1, std::size_t n2) : a({n1}), b({n2}), W({n2, n1}) {}

  std::size_t n1() const noexcept { return a.size(); }
  std::size_t n2() const noexcept { return b.size(); }

  /// Biases ~ Normal(0, bias_std), couplings ~ Normal(0, weight_std).
  static Rbm random(std::size_t n1, std::size_t n2, double weight_std, double bias_std, Rng& rng);

  // Throws if shapes are inconsistent or an entry is not finite.
  void validate() const;
};

/// E(v1, v2) for binary or relaxed states in [0,1].
double energy(const Rbm& rbm, std::span<const double> v1, std::span<const double> v2);

/// log sum_z exp(-E(z)) by enumerating the smaller layer and summing the
/// other one analytically. Throws when the smaller layer exceeds 24 units.
double exact_log_partition(const Rbm& rbm);

inline constexpr std::size_t kMaxEnumerationUnits = 24;

/// Persistent Gibbs chains, one random stream per chain.
class PcdChains {
 public:
  PcdChains() = default;
  // Fair coin-flip initialisation.
  PcdChains(std::size_t num_chains, std::size_t n1, std::size_t n2, std::uint64_t seed);

  std::size_t size() const noexcept { return z1.rows(); }
  std::size_t n1() const noexcept { return z1.cols(); }
  std::size_t n2() const noexcept { return z2.cols(); }

  Tensor z1;  // [chains x n1], entries in {0,1}
  Tensor z2;  // [chains x n2]
  std::vector<Rng> rngs;
};

/// One block update at inverse temperature `beta`: z2 | z1 then z1 | z2.
void gibbs_sweep(const Rbm& rbm, PcdChains& chains, double beta = 1.0);

/// Monte-Carlo estimate of grad log Z = E_p[-grad E] = (E z1, E z2, E z2 z1^T).
struct NegativePhase {
  Tensor grad_a;  // [n1]
  Tensor grad_b;  // [n2]
  Tensor grad_W;  // [n2 x n1]
  // Standard errors of the above across chains.
  Tensor se_a;
  Tensor se_b;
  Tensor se_W;
};

/// Advances the chains by `sweeps` block updates and averages over the final states.
NegativePhase pcd_negative_phase(const Rbm& rbm, PcdChains& chains, std::size_t sweeps);

/// Chain-average moments of the current chain states, without sweeping.
NegativePhase chain_moments(const PcdChains& chains);

/// Exact grad log Z by enumerating every joint state (n1 + n2 <= 20). Standard
/// errors are zero.
NegativePhase exact_negative_phase(const Rbm& rbm);

}  // namespace gumbolt
