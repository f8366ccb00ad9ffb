#include "gumbolt/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gumbolt/kernels.hpp"
#include "gumbolt/numeric.hpp"

namespace gumbolt {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace

double clamp_noise(double rho) { return std::clamp(rho, kNoiseClamp, 1.0 - kNoiseClamp); }

std::vector<double> relax(std::span<const double> logits, std::span<const double> rho, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("relax: temperature must be positive; use discretize");
  require_same(logits.size(), rho.size(), "relax");
  std::vector<double> zeta(logits.size());
  for (std::size_t i = 0; i < zeta.size(); ++i)
    zeta[i] = sigmoid((logits[i] + logit(clamp_noise(rho[i]))) / tau);
  return zeta;
}

std::vector<double> discretize(std::span<const double> logits, std::span<const double> rho) {
  require_same(logits.size(), rho.size(), "discretize");
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = logits[i] + logit(clamp_noise(rho[i])) >= 0.0 ? 1.0 : 0.0;
  return z;
}

double log_pmf_proxy(std::span<const double> zeta, std::span<const double> q_mean) {
  require_same(zeta.size(), q_mean.size(), "log_pmf_proxy");
  double s = 0.0;
  for (std::size_t i = 0; i < zeta.size(); ++i) {
    const double q = std::clamp(q_mean[i], kMeanClamp, 1.0 - kMeanClamp);
    s += zeta[i] * std::log(q) + (1.0 - zeta[i]) * std::log1p(-q);
  }
  return s;
}

double proxy_log_prior(const Rbm& rbm, std::span<const double> zeta1,
                       std::span<const double> zeta2, double log_z) {
  return -energy(rbm, zeta1, zeta2) - log_z;
}

ExtremaCheck check_vertex_extrema(const Rbm& rbm, double grid_step) {
  if (!(grid_step > 0.0) || grid_step > 1.0)
    throw std::invalid_argument("check_vertex_extrema: grid step must be in (0, 1]");
  const std::size_t n1 = rbm.n1(), n = n1 + rbm.n2();
  if (n > 12) throw std::invalid_argument("check_vertex_extrema: too many units for a grid scan");
  const auto levels = static_cast<std::size_t>(std::llround(1.0 / grid_step)) + 1;

  ExtremaCheck out;
  out.grid_min = out.vertex_min = std::numeric_limits<double>::infinity();
  out.grid_max = out.vertex_max = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> v(n);
  for (;;) {
    bool vertex = true;
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = std::min(1.0, static_cast<double>(idx[k]) * grid_step);
      vertex = vertex && (idx[k] == 0 || idx[k] == levels - 1);
    }
    const double e = energy(rbm, std::span<const double>(v).first(n1),
                            std::span<const double>(v).subspan(n1));
    out.grid_min = std::min(out.grid_min, e);
    out.grid_max = std::max(out.grid_max, e);
    if (vertex) {
      out.vertex_min = std::min(out.vertex_min, e);
      out.vertex_max = std::max(out.vertex_max, e);
    }
    std::size_t k = 0;
    while (k < n && ++idx[k] == levels) idx[k++] = 0;
    if (k == n) break;
  }
  const double tol = 1e-12 * (1.0 + std::abs(out.vertex_min) + std::abs(out.vertex_max));
  out.passed = out.grid_min >= out.vertex_min - tol && out.grid_max <= out.vertex_max + tol;
  return out;
}

RelaxedPartitionCheck check_relaxed_partition(const Rbm& rbm, std::size_t samples,
                                              std::uint64_t seed) {
  constexpr double kZ99 = 2.5758293035489004;
  const kernels::McEstimate mc = kernels::omp::relaxed_partition(rbm, samples, seed);
  RelaxedPartitionCheck out;
  out.relaxed_z = mc.mean;
  out.relaxed_z_se = mc.std_error;
  out.ci_upper = mc.mean + kZ99 * mc.std_error;
  out.discrete_z = std::exp(exact_log_partition(rbm));
  out.passed = out.ci_upper <= out.discrete_z;
  return out;
}

}  // namespace gumbolt
