#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gumbolt/relaxation.hpp"
#include "oracles.hpp"

using namespace gumbolt;

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

TEST(Relax, HalfNoiseIsPlainSigmoid) {
  const std::vector<double> l{-1.3, 0.0, 2.2}, rho(3, 0.5);
  const auto z = relax(l, rho, 0.5);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(z[i], oracle::sigmoid(l[i] / 0.5), 1e-15);
}

TEST(Relax, ZeroLogitHalfNoiseIsHalfAtAnyTemperature) {
  for (double tau : {1e-3, 0.1, 1.0, 10.0})
    EXPECT_EQ(relax(std::vector<double>{0.0}, std::vector<double>{0.5}, tau)[0], 0.5);
}

TEST(Relax, ScalarExample) {
  const double z = relax(std::vector<double>{2.0}, std::vector<double>{0.3}, 1.0 / 7.0)[0];
  EXPECT_NEAR(2.0 + logit(0.3), 1.152702, 1e-6);
  EXPECT_NEAR(z, oracle::sigmoid(7.0 * (2.0 + logit(0.3))), 1e-15);
  EXPECT_NEAR(z, 0.99969, 5e-6);
}

TEST(Relax, NonPositiveTemperatureIsAnError) {
  EXPECT_THROW(relax(std::vector<double>{0.0}, std::vector<double>{0.5}, 0.0), std::invalid_argument);
  EXPECT_THROW(relax(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5}, 1.0),
               std::invalid_argument);
}

TEST(Relax, NoiseIsClampedAwayFromTheEnds) {
  const auto z = relax(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 1.0}, 1.0);
  EXPECT_TRUE(std::isfinite(z[0]) && std::isfinite(z[1]));
  EXPECT_GT(z[0], 0.0);
  EXPECT_LT(z[1], 1.0);
}

TEST(Relax, MonotoneInLogitAndNoise) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0), n(-4.0, 4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double l = n(rng), r = u(rng), tau = 0.05 + u(rng);
    const double base = relax(std::vector<double>{l}, std::vector<double>{r}, tau)[0];
    EXPECT_GE(relax(std::vector<double>{l + 0.1}, std::vector<double>{r}, tau)[0], base);
    EXPECT_GE(relax(std::vector<double>{l}, std::vector<double>{std::min(r + 0.01, 1.0)}, tau)[0], base);
  }
}

TEST(Discretize, SaturatedLogitIsOne) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial)
    EXPECT_EQ(discretize(std::vector<double>{50.0}, std::vector<double>{u(rng)})[0], 1.0);
}

TEST(Discretize, HeavisideAtZeroIsOne) {
  EXPECT_EQ(discretize(std::vector<double>{0.0}, std::vector<double>{0.5})[0], 1.0);
}

TEST(Discretize, MeanMatchesSigmoid) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double l : {-2.0, -0.3, 0.0, 1.1}) {
    const std::size_t n = 100000;
    double ones = 0.0;
    for (std::size_t s = 0; s < n; ++s) ones += discretize(std::vector<double>{l}, std::vector<double>{u(rng)})[0];
    const double p = oracle::sigmoid(l);
    EXPECT_NEAR(ones / n, p, 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(Discretize, AgreesWithColdRelaxation) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0), n(-3.0, 3.0);
  int agree = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::vector<double> l{n(rng)}, r{u(rng)};
    agree += std::round(relax(l, r, 1e-4)[0]) == discretize(l, r)[0];
  }
  EXPECT_EQ(agree, 10000);
}

TEST(LogPmfProxy, OneUnitExamples) {
  EXPECT_NEAR(log_pmf_proxy(std::vector<double>{1.0}, std::vector<double>{0.5}), -0.6931, 1e-4);
  EXPECT_NEAR(log_pmf_proxy(std::vector<double>{0.5}, std::vector<double>{0.5}), std::log(0.5), 1e-15);
}

TEST(LogPmfProxy, TwoUnitExample) {
  const double expected =
      0.2 * std::log(0.3) + 0.8 * std::log(0.7) + 0.9 * std::log(0.6) + 0.1 * std::log(0.4);
  const double got = log_pmf_proxy(std::vector<double>{0.2, 0.9}, std::vector<double>{0.3, 0.6});
  EXPECT_NEAR(got, expected, 1e-15);
  EXPECT_NEAR(got, -1.0775, 1e-4);
}

TEST(LogPmfProxy, MeansAreClamped) {
  const double got = log_pmf_proxy(std::vector<double>{1.0}, std::vector<double>{0.0});
  EXPECT_NEAR(got, std::log(kMeanClamp), 1e-12);
}

TEST(LogPmfProxy, LengthMismatchIsAnError) {
  EXPECT_THROW(log_pmf_proxy(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5}),
               std::invalid_argument);
}

TEST(ProxyLogPrior, ZeroRbmIsUniform) {
  const Rbm rbm(1, 1);
  const double lz = exact_log_partition(rbm);
  EXPECT_NEAR(proxy_log_prior(rbm, std::vector<double>{0.3}, std::vector<double>{0.8}, lz),
              -std::log(4.0), 1e-15);
}

TEST(ProxyLogPrior, BinaryStatesMatchExactPmf) {
  Rng rng(9);
  const Rbm rbm = Rbm::random(3, 3, 1.0, 1.0, rng);
  const double lz = exact_log_partition(rbm);
  const auto p = oracle::brute_probabilities(rbm);
  std::vector<double> z1(3), z2(3);
  for (std::uint64_t c = 0; c < 64; ++c) {
    oracle::unpack(c, z1, z2);
    EXPECT_NEAR(proxy_log_prior(rbm, z1, z2, lz), std::log(p[c]), 1e-12);
  }
}

TEST(ProxyLogPrior, BelowTrueRelaxedDensity) {
  Rng rng(10);
  const Rbm rbm = Rbm::random(3, 3, 1.0, 1.0, rng);
  const RelaxedPartitionCheck check = check_relaxed_partition(rbm, 1 << 16, 3);
  const double lz = exact_log_partition(rbm);
  const double log_z_relaxed_upper = std::log(check.ci_upper);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z1(3), z2(3);
    for (auto& v : z1) v = u(rng);
    for (auto& v : z2) v = u(rng);
    const double relaxed = -energy(rbm, z1, z2) - log_z_relaxed_upper;
    EXPECT_LE(proxy_log_prior(rbm, z1, z2, lz), relaxed);
  }
}

TEST(VertexExtrema, HoldOnRandomRbms) {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> width(1, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Rbm rbm = Rbm::random(width(rng), width(rng), 1.0, 1.0, rng);
    const ExtremaCheck c = check_vertex_extrema(rbm, 0.25);
    EXPECT_TRUE(c.passed);
    EXPECT_LE(c.vertex_min, c.grid_min + 1e-12);
    EXPECT_GE(c.vertex_max, c.grid_max - 1e-12);
  }
}

TEST(RelaxedPartition, StaysBelowDiscreteSum) {
  Rng rng(12);
  int passed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Rbm rbm = Rbm::random(3, 3, 1.0, 1.0, rng);
    const auto c = check_relaxed_partition(rbm, 1 << 14, 100 + trial);
    passed += c.passed;
    EXPECT_NEAR(c.discrete_z, std::exp(oracle::brute_log_z(rbm)), 1e-9 * c.discrete_z);
  }
  EXPECT_GE(passed, 19);
}

TEST(RelaxedPartition, ZeroRbmIsOneVersusTwoToTheN) {
  const auto c = check_relaxed_partition(Rbm(2, 2), 1000, 1);
  EXPECT_NEAR(c.relaxed_z, 1.0, 1e-12);
  EXPECT_NEAR(c.discrete_z, 16.0, 1e-12);
  EXPECT_TRUE(c.passed);
}
