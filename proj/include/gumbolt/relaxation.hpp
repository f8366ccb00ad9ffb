#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gumbolt/rbm.hpp"

namespace gumbolt {

inline constexpr double kNoiseClamp = 1e-7;
inline constexpr double kMeanClamp = 1e-7;

double clamp_noise(double rho);

/// Binary Gumbel relaxation: zeta = sigmoid((l + logit(rho)) / tau). Requires tau > 0.
std::vector<double> relax(std::span<const double> logits, std::span<const double> rho, double tau);

/// tau -> 0 limit of relax: z = H(l + logit(rho)) with H(0) = 1.
std::vector<double> discretize(std::span<const double> logits, std::span<const double> rho);

/// sum_i zeta_i log q_i + (1 - zeta_i) log(1 - q_i), q clamped to [1e-7, 1 - 1e-7].
double log_pmf_proxy(std::span<const double> zeta, std::span<const double> q_mean);

/// -E(zeta1, zeta2) - log_z: the unnormalised log density over the cube with the discrete normaliser.
double proxy_log_prior(const Rbm& rbm, std::span<const double> zeta1,
                       std::span<const double> zeta2, double log_z);

/// Extremes of the relaxed energy over a regular grid versus over the cube's vertices.
struct ExtremaCheck {
  double grid_min = 0.0;
  double grid_max = 0.0;
  double vertex_min = 0.0;
  double vertex_max = 0.0;
  bool passed = false;
};

ExtremaCheck check_vertex_extrema(const Rbm& rbm, double grid_step);

/// Compares the Monte-Carlo integral of exp(-E) over [0,1]^n with the discrete
/// partition sum.
struct RelaxedPartitionCheck {
  double relaxed_z = 0.0;     // MC mean
  double relaxed_z_se = 0.0;
  double ci_upper = 0.0;      // 99% upper confidence bound
  double discrete_z = 0.0;
  bool passed = false;        // ci_upper <= discrete_z
};

RelaxedPartitionCheck check_relaxed_partition(const Rbm& rbm, std::size_t samples,
                                              std::uint64_t seed);

}  // namespace gumbolt
