#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gumbolt/kernels.hpp"
#include "kernel_impl.hpp"

namespace gumbolt::kernels::serial {

void gibbs_sweep(const Rbm& rbm, double beta, Tensor& z1, Tensor& z2, std::span<Rng> rngs) {
  const auto chains = static_cast<std::ptrdiff_t>(rngs.size());
  const std::size_t n1 = rbm.n1(), n2 = rbm.n2();
  double* p1 = z1.data();
  double* p2 = z2.data();

  for (std::ptrdiff_t c = 0; c < chains; ++c)
    detail::gibbs_chain(rbm, beta, p1 + c * n1, p2 + c * n2, rngs[c]);
}

void chain_energies(const Rbm& rbm, const Tensor& z1, const Tensor& z2, std::span<double> out) {
  const auto chains = static_cast<std::ptrdiff_t>(out.size());
  const std::size_t n1 = rbm.n1(), n2 = rbm.n2();

  for (std::ptrdiff_t c = 0; c < chains; ++c)
    out[c] = detail::chain_energy(rbm, z1.data() + c * n1, z2.data() + c * n2);
}

double log_partition(const Rbm& rbm) {
  const detail::PartitionTerm term{rbm, rbm.n1() <= rbm.n2()};
  const std::uint64_t configs = std::uint64_t{1} << term.n_enum();
  const std::uint64_t blocks = (configs + detail::kPartitionBlock - 1) / detail::kPartitionBlock;
  std::vector<double> block_lse(blocks);

  for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
    std::vector<double> scratch;
    LogSumExpAccumulator acc;
    const std::uint64_t lo = static_cast<std::uint64_t>(blk) * detail::kPartitionBlock;
    const std::uint64_t hi = std::min(configs, lo + detail::kPartitionBlock);
    for (std::uint64_t code = lo; code < hi; ++code) acc.add(term(code, scratch));
    block_lse[blk] = acc.value();
  }
  return log_sum_exp(block_lse);
}

McEstimate relaxed_partition(const Rbm& rbm, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("relaxed_partition: need at least 2 samples");
  const std::size_t blocks = (samples + kMcBlock - 1) / kMcBlock;
  std::vector<detail::McPartial> partial(blocks);

  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kMcBlock;
    partial[blk] = detail::relaxed_block(rbm, seed, blk, std::min(samples, lo + kMcBlock) - lo);
  }
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& p : partial) {
    sum += p.sum;
    sum_sq += p.sum_sq;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq / n - mean * mean) * n / (n - 1.0));
  return {mean, std::sqrt(var / n), samples};
}

}  // namespace gumbolt::kernels::serial
