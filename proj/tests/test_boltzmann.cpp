#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>

#include "gumbolt/rbm.hpp"
#include "oracles.hpp"

using namespace gumbolt;

namespace {

std::uint64_t state_code(const PcdChains& c, std::size_t chain) {
  std::uint64_t code = 0;
  for (std::size_t i = 0; i < c.n1(); ++i) code |= static_cast<std::uint64_t>(c.z1.at(chain, i)) << i;
  for (std::size_t j = 0; j < c.n2(); ++j)
    code |= static_cast<std::uint64_t>(c.z2.at(chain, j)) << (c.n1() + j);
  return code;
}

}  // namespace

TEST(Energy, ZeroParametersGiveZero) {
  Rbm rbm(3, 2);
  EXPECT_EQ(energy(rbm, std::vector<double>{1, 0, 1}, std::vector<double>{0.3, 1}), 0.0);
}

TEST(Energy, DirectSubstitution) {
  Rbm rbm(1, 1);
  rbm.a[0] = 1;
  rbm.b[0] = 2;
  rbm.W[0] = 3;
  EXPECT_EQ(energy(rbm, std::vector<double>{1}, std::vector<double>{1}), -6.0);
}

TEST(Energy, RelaxedHalfMatchesScalarLoop) {
  Rng rng(3);
  const Rbm rbm = Rbm::random(3, 3, 1.0, 1.0, rng);
  const std::vector<double> half(3, 0.5);
  EXPECT_NEAR(energy(rbm, half, half), -oracle::neg_energy(rbm, half, half), 1e-14);
}

TEST(Energy, DimensionMismatchIsAnError) {
  Rbm rbm(2, 2);
  EXPECT_THROW(energy(rbm, std::vector<double>{1}, std::vector<double>{1, 0}), std::invalid_argument);
}

TEST(Energy, MultilinearInEachCoordinate) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Rbm rbm = Rbm::random(3, 4, 1.0, 1.0, rng);
    std::vector<double> v1(3), v2(4);
    for (auto& v : v1) v = u(rng);
    for (auto& v : v2) v = u(rng);
    for (std::size_t i = 0; i < 7; ++i) {
      double& coord = i < 3 ? v1[i] : v2[i - 3];
      const double t0 = u(rng), t1 = u(rng), t2 = u(rng);
      coord = t0;
      const double e0 = energy(rbm, v1, v2);
      coord = t1;
      const double e1 = energy(rbm, v1, v2);
      coord = t2;
      const double e2 = energy(rbm, v1, v2);
      // Slopes between the three points agree.
      EXPECT_NEAR((e1 - e0) * (t2 - t0), (e2 - e0) * (t1 - t0), 1e-12);
    }
  }
}

TEST(ExactLogPartition, ZeroOnePlusOne) {
  EXPECT_NEAR(exact_log_partition(Rbm(1, 1)), std::log(4.0), 1e-15);
}

TEST(ExactLogPartition, SingleLayerFactorises) {
  Rbm rbm(1, 0);
  rbm.a[0] = 1.0;
  EXPECT_NEAR(exact_log_partition(rbm), 1.3132617, 1e-7);
  EXPECT_NEAR(exact_log_partition(rbm), std::log1p(std::numbers::e), 1e-15);
}

TEST(ExactLogPartition, MatchesBruteForce) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Rbm rbm = Rbm::random(4, 4, 1.0, 1.0, rng);
    EXPECT_NEAR(exact_log_partition(rbm), oracle::brute_log_z(rbm), 1e-12);
  }
}

TEST(ExactLogPartition, PartitionSumRelativeError) {
  Rng rng(18);
  for (std::size_t n1 = 1; n1 <= 6; ++n1) {
    const Rbm rbm = Rbm::random(n1, 12 - n1, 0.7, 0.7, rng);
    double z = 0.0;
    std::vector<double> z1(rbm.n1()), z2(rbm.n2());
    for (std::uint64_t c = 0; c < 4096; ++c) {
      oracle::unpack(c, z1, z2);
      z += std::exp(oracle::neg_energy(rbm, z1, z2));
    }
    EXPECT_LT(std::abs(std::exp(exact_log_partition(rbm)) - z) / z, 1e-12);
  }
}

TEST(ExactLogPartition, UnbalancedLayersEnumerateTheSmallerOne) {
  Rng rng(21);
  const Rbm rbm = Rbm::random(3, 30, 0.3, 0.3, rng);
  // Sum over z2 factorises given z1.
  double expected = 0.0;
  std::vector<double> terms;
  for (std::uint64_t c = 0; c < 8; ++c) {
    double t = 0.0;
    std::vector<double> z1(3);
    for (std::size_t i = 0; i < 3; ++i) z1[i] = static_cast<double>((c >> i) & 1u);
    for (std::size_t i = 0; i < 3; ++i) t += rbm.a[i] * z1[i];
    for (std::size_t j = 0; j < 30; ++j) {
      double act = rbm.b[j];
      for (std::size_t i = 0; i < 3; ++i) act += rbm.W[j * 3 + i] * z1[i];
      t += std::log1p(std::exp(act));
    }
    terms.push_back(t);
  }
  expected = oracle::log_sum_exp(terms);
  EXPECT_NEAR(exact_log_partition(rbm), expected, 1e-11);
}

TEST(ExactLogPartition, GuardRejectsLargeRbm) {
  try {
    exact_log_partition(Rbm(25, 25));
    FAIL() << "expected the enumeration guard";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("tempering"), std::string::npos);
  }
}

TEST(ExactLogPartition, NonFiniteParameterIsAnError) {
  Rbm rbm(2, 2);
  rbm.W[1] = std::nan("");
  EXPECT_THROW(exact_log_partition(rbm), std::domain_error);
}

TEST(PcdChains, CoinFlipInitialisation) {
  PcdChains a(2000, 3, 2, 5), b(2000, 3, 2, 5);
  EXPECT_TRUE(a.z1 == b.z1);
  EXPECT_TRUE(a.z2 == b.z2);
  double ones = 0.0;
  for (double v : a.z1.values()) {
    EXPECT_TRUE(v == 0.0 || v == 1.0);
    ones += v;
  }
  const double n = static_cast<double>(a.z1.size());
  EXPECT_NEAR(ones / n, 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(GibbsSweep, ZeroRbmConditionalMeanIsHalf) {
  Rbm rbm(4, 3);
  PcdChains chains(4000, 4, 3, 1);
  gibbs_sweep(rbm, chains);
  const NegativePhase m = chain_moments(chains);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(m.grad_a[i], 0.5, 3 * m.se_a[i]);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.grad_b[j], 0.5, 3 * m.se_b[j]);
}

TEST(GibbsSweep, SaturatedBiasPinsUnit) {
  Rbm rbm(1, 1);
  rbm.b[0] = 10.0;
  PcdChains chains(1, 1, 1, 2);
  double ones = 0.0;
  for (int s = 0; s < 1000; ++s) {
    gibbs_sweep(rbm, chains);
    ones += chains.z2[0];
  }
  EXPECT_GT(ones / 1000.0, 0.99);
}

TEST(GibbsSweep, DimensionMismatchIsAnError) {
  PcdChains chains(3, 2, 2, 1);
  EXPECT_THROW(gibbs_sweep(Rbm(3, 2), chains), std::invalid_argument);
}

TEST(GibbsSweep, LongRunFrequenciesMatchBoltzmann) {
  Rng rng(33);
  const Rbm rbm = Rbm::random(2, 2, 1.0, 0.5, rng);
  const auto p = oracle::brute_probabilities(rbm);
  PcdChains chains(2000, 2, 2, 7);
  for (int s = 0; s < 50; ++s) gibbs_sweep(rbm, chains);
  std::vector<double> counts(16, 0.0);
  double total = 0.0;
  for (int s = 0; s < 200; ++s) {
    gibbs_sweep(rbm, chains);
    if (s % 10) continue;
    for (std::size_t c = 0; c < chains.size(); ++c) counts[state_code(chains, c)] += 1.0;
    total += static_cast<double>(chains.size());
  }
  for (std::size_t s = 0; s < 16; ++s) {
    const double f = counts[s] / total;
    EXPECT_NEAR(f, p[s], 3 * std::sqrt(p[s] * (1 - p[s]) / total) + 1e-12) << "state " << s;
  }
}

TEST(GibbsSweep, DetailedBalanceChiSquare) {
  Rng rng(34);
  const Rbm rbm = Rbm::random(3, 3, 0.5, 0.5, rng);
  const auto p = oracle::brute_probabilities(rbm);
  // 1000 chains x 1000 sweeps; states recorded every 10 sweeps after burn-in.
  PcdChains chains(1000, 3, 3, 11);
  std::vector<double> counts(64, 0.0);
  double total = 0.0;
  for (int s = 0; s < 1000; ++s) {
    gibbs_sweep(rbm, chains);
    if (s < 100 || s % 10) continue;
    for (std::size_t c = 0; c < chains.size(); ++c) counts[state_code(chains, c)] += 1.0;
    total += static_cast<double>(chains.size());
  }
  double chi2 = 0.0;
  for (std::size_t s = 0; s < 64; ++s) chi2 += std::pow(counts[s] - total * p[s], 2) / (total * p[s]);
  const double p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(63), chi2));
  EXPECT_GT(p_value, 0.001) << "chi2 " << chi2;
}

TEST(PcdNegativePhase, ZeroRbmGivesHalf) {
  Rbm rbm(5, 5);
  PcdChains chains(1000, 5, 5, 3);
  const NegativePhase np = pcd_negative_phase(rbm, chains, 10);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(np.grad_a[i], 0.5, 3 * np.se_a[i]);
  EXPECT_EQ(np.grad_W.shape(), (std::vector<std::size_t>{5, 5}));
}

TEST(PcdNegativePhase, NeedsAtLeastOneSweep) {
  PcdChains chains(2, 1, 1, 3);
  EXPECT_THROW(pcd_negative_phase(Rbm(1, 1), chains, 0), std::invalid_argument);
}

TEST(PcdNegativePhase, ChainsPersistAcrossCalls) {
  Rng rng(4);
  const Rbm rbm = Rbm::random(3, 3, 1.0, 1.0, rng);
  PcdChains a(10, 3, 3, 8), b(10, 3, 3, 8);
  pcd_negative_phase(rbm, a, 3);
  pcd_negative_phase(rbm, a, 2);
  pcd_negative_phase(rbm, b, 5);
  EXPECT_TRUE(a.z1 == b.z1);
  EXPECT_TRUE(a.z2 == b.z2);
}

TEST(ExactNegativePhase, MatchesFiniteDifferencesOfLogZ) {
  Rng rng(12);
  const Rbm rbm = Rbm::random(3, 2, 1.0, 1.0, rng);
  const NegativePhase exact = exact_negative_phase(rbm);
  std::vector<double> theta;
  for (double v : rbm.a.values()) theta.push_back(v);
  for (double v : rbm.b.values()) theta.push_back(v);
  for (double v : rbm.W.values()) theta.push_back(v);
  const auto fd = oracle::finite_differences(
      [&](const std::vector<double>& t) {
        Rbm r(3, 2);
        std::size_t o = 0;
        for (auto& v : r.a.values()) v = t[o++];
        for (auto& v : r.b.values()) v = t[o++];
        for (auto& v : r.W.values()) v = t[o++];
        return oracle::brute_log_z(r);
      },
      theta, 1e-5);
  std::size_t o = 0;
  for (double v : exact.grad_a.values()) EXPECT_NEAR(v, fd[o++], 1e-8);
  for (double v : exact.grad_b.values()) EXPECT_NEAR(v, fd[o++], 1e-8);
  for (double v : exact.grad_W.values()) EXPECT_NEAR(v, fd[o++], 1e-8);
}
