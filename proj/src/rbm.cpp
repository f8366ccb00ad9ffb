#include "gumbolt/rbm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gumbolt/kernels.hpp"
#include "kernel_impl.hpp"

namespace gumbolt {

Rbm Rbm::random(std::size_t n1, std::size_t n2, double weight_std, double bias_std, Rng& rng) {
  Rbm rbm(n1, n2);
  std::normal_distribution<double> wdist(0.0, weight_std), bdist(0.0, bias_std);
  for (auto& v : rbm.a.values()) v = bias_std > 0 ? bdist(rng) : 0.0;
  for (auto& v : rbm.b.values()) v = bias_std > 0 ? bdist(rng) : 0.0;
  for (auto& v : rbm.W.values()) v = weight_std > 0 ? wdist(rng) : 0.0;
  return rbm;
}

void Rbm::validate() const {
  if (W.size() != a.size() * b.size())
    throw std::invalid_argument("rbm: W has " + std::to_string(W.size()) + " entries, expected " +
                                std::to_string(a.size() * b.size()));
  if (!a.all_finite() || !b.all_finite() || !W.all_finite())
    throw std::domain_error("rbm: non-finite parameter");
}

double energy(const Rbm& rbm, std::span<const double> v1, std::span<const double> v2) {
  const std::size_t n1 = rbm.n1(), n2 = rbm.n2();
  if (v1.size() != n1 || v2.size() != n2)
    throw std::invalid_argument("energy: state sizes " + std::to_string(v1.size()) + "+" +
                                std::to_string(v2.size()) + " do not match rbm " +
                                std::to_string(n1) + "+" + std::to_string(n2));
  double neg = 0.0;
  for (std::size_t i = 0; i < n1; ++i) neg += rbm.a[i] * v1[i];
  for (std::size_t j = 0; j < n2; ++j) {
    double act = rbm.b[j];
    const double* wr = rbm.W.data() + j * n1;
    for (std::size_t i = 0; i < n1; ++i) act += wr[i] * v1[i];
    neg += act * v2[j];
  }
  return -neg;
}

double exact_log_partition(const Rbm& rbm) {
  rbm.validate();
  if (std::min(rbm.n1(), rbm.n2()) > kMaxEnumerationUnits)
    throw std::invalid_argument("exact_log_partition: both layers exceed " +
                                std::to_string(kMaxEnumerationUnits) +
                                " units; use the parallel-tempering estimator instead");
  return kernels::omp::log_partition(rbm);
}

PcdChains::PcdChains(std::size_t num_chains, std::size_t n1, std::size_t n2, std::uint64_t seed)
    : z1({num_chains, n1}), z2({num_chains, n2}) {
  rngs.reserve(num_chains);
  for (std::size_t c = 0; c < num_chains; ++c) {
    rngs.push_back(kernels::detail::block_rng(seed, c));
    Rng& rng = rngs.back();
    for (auto& v : z1.row(c)) v = kernels::detail::uniform01(rng) < 0.5 ? 1.0 : 0.0;
    for (auto& v : z2.row(c)) v = kernels::detail::uniform01(rng) < 0.5 ? 1.0 : 0.0;
  }
}

void gibbs_sweep(const Rbm& rbm, PcdChains& chains, double beta) {
  if (chains.n1() != rbm.n1() || chains.n2() != rbm.n2())
    throw std::invalid_argument("gibbs_sweep: chains dimensioned for a different rbm");
  kernels::omp::gibbs_sweep(rbm, beta, chains.z1, chains.z2, chains.rngs);
}

NegativePhase chain_moments(const PcdChains& chains) {
  const std::size_t c = chains.size(), n1 = chains.n1(), n2 = chains.n2();
  if (c == 0) throw std::invalid_argument("chain_moments: no chains");
  NegativePhase out{Tensor({n1}), Tensor({n2}), Tensor({n2, n1}),
                    Tensor({n1}), Tensor({n2}), Tensor({n2, n1})};
  for (std::size_t k = 0; k < c; ++k) {
    auto z1 = chains.z1.row(k);
    auto z2 = chains.z2.row(k);
    for (std::size_t i = 0; i < n1; ++i) out.grad_a[i] += z1[i];
    for (std::size_t j = 0; j < n2; ++j) {
      out.grad_b[j] += z2[j];
      if (z2[j] == 0.0) continue;
      for (std::size_t i = 0; i < n1; ++i) out.grad_W[j * n1 + i] += z1[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(c);
  // Entries are Bernoulli, so the sample variance is m(1-m) * c/(c-1).
  auto finish = [&](Tensor& mean, Tensor& se) {
    for (std::size_t k = 0; k < mean.size(); ++k) {
      mean[k] *= inv;
      const double var = c > 1 ? mean[k] * (1.0 - mean[k]) * c / (c - 1.0) : 0.0;
      se[k] = std::sqrt(var * inv);
    }
  };
  finish(out.grad_a, out.se_a);
  finish(out.grad_b, out.se_b);
  finish(out.grad_W, out.se_W);
  return out;
}

NegativePhase pcd_negative_phase(const Rbm& rbm, PcdChains& chains, std::size_t sweeps) {
  if (sweeps == 0) throw std::invalid_argument("pcd_negative_phase: need at least one sweep");
  for (std::size_t s = 0; s < sweeps; ++s) gibbs_sweep(rbm, chains, 1.0);
  return chain_moments(chains);
}

NegativePhase exact_negative_phase(const Rbm& rbm) {
  const std::size_t n1 = rbm.n1(), n2 = rbm.n2(), n = n1 + n2;
  if (n > 20) throw std::invalid_argument("exact_negative_phase: at most 20 units");
  const double log_z = exact_log_partition(rbm);
  NegativePhase out{Tensor({n1}), Tensor({n2}), Tensor({n2, n1}),
                    Tensor({n1}), Tensor({n2}), Tensor({n2, n1})};
  std::vector<double> z1(n1), z2(n2);
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    for (std::size_t i = 0; i < n1; ++i) z1[i] = static_cast<double>((code >> i) & 1u);
    for (std::size_t j = 0; j < n2; ++j) z2[j] = static_cast<double>((code >> (n1 + j)) & 1u);
    const double p = std::exp(-energy(rbm, z1, z2) - log_z);
    for (std::size_t i = 0; i < n1; ++i) out.grad_a[i] += p * z1[i];
    for (std::size_t j = 0; j < n2; ++j) {
      out.grad_b[j] += p * z2[j];
      for (std::size_t i = 0; i < n1; ++i) out.grad_W[j * n1 + i] += p * z2[j] * z1[i];
    }
  }
  return out;
}

}  // namespace gumbolt
