#include "gumbolt/tempering.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "gumbolt/kernels.hpp"
#include "gumbolt/numeric.hpp"

namespace gumbolt {

LogZPreset desk_preset() { return {"desk", 2000, 10000, 10, 0.02}; }
LogZPreset paper_preset() { return {"paper", 20000, 100000, 20, 0.01}; }

LogZPreset preset_by_name(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  throw std::invalid_argument("unknown log Z preset '" + name + "' (expected desk or paper)");
}

void TemperingLadder::validate() const {
  if (betas.size() < 2 || betas.front() != 0.0 || betas.back() != 1.0)
    throw std::invalid_argument("ladder must start at beta=0 and end at beta=1");
  for (std::size_t i = 1; i < betas.size(); ++i)
    if (!(betas[i] > betas[i - 1])) throw std::invalid_argument("ladder betas must increase");
}

TemperingLadder make_ladder(const Rbm& rbm, std::vector<double> betas, std::size_t chains_per_rung,
                            std::uint64_t seed) {
  TemperingLadder ladder;
  ladder.betas = std::move(betas);
  ladder.validate();
  for (std::size_t r = 0; r < ladder.betas.size(); ++r)
    ladder.chains.emplace_back(chains_per_rung, rbm.n1(), rbm.n2(), seed * 1000003ULL + r);
  const std::size_t pairs = ladder.betas.size() - 1;
  ladder.attempted.assign(pairs, 0);
  ladder.accepted.assign(pairs, 0);
  ladder.exchange_rates.assign(pairs, 0.0);
  return ladder;
}

namespace {

void swap_rows(Tensor& a, Tensor& b, std::size_t row) {
  std::swap_ranges(a.row(row).begin(), a.row(row).end(), b.row(row).begin());
}

}  // namespace

void run_tempering(const Rbm& rbm, TemperingLadder& ladder, std::size_t sweeps, Rng& exchange_rng,
                   bool exchange, EnergyRecords* records) {
  const std::size_t rungs = ladder.size();
  const std::size_t chains = ladder.chains.front().size();
  std::vector<std::vector<double>> energies(rungs, std::vector<double>(chains));
  std::vector<double> prob_sum(rungs - 1, 0.0);
  std::vector<std::size_t> proposals(rungs - 1, 0);
  if (records && records->by_rung.size() != rungs) records->by_rung.assign(rungs, {});
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (std::size_t t = 0; t < sweeps; ++t) {
    for (std::size_t r = 0; r < rungs; ++r) {
      PcdChains& ch = ladder.chains[r];
      kernels::omp::gibbs_sweep(rbm, ladder.betas[r], ch.z1, ch.z2, ch.rngs);
      kernels::omp::chain_energies(rbm, ch.z1, ch.z2, energies[r]);
      if (records)
        records->by_rung[r].insert(records->by_rung[r].end(), energies[r].begin(),
                                   energies[r].end());
    }
    if (!exchange) continue;
    for (std::size_t i = t % 2; i + 1 < rungs; i += 2) {
      const double d_beta = ladder.betas[i] - ladder.betas[i + 1];
      PcdChains& lo = ladder.chains[i];
      PcdChains& hi = ladder.chains[i + 1];
      for (std::size_t c = 0; c < chains; ++c) {
        const double log_acc = d_beta * (energies[i][c] - energies[i + 1][c]);
        const double p = log_acc >= 0.0 ? 1.0 : std::exp(log_acc);
        prob_sum[i] += p;
        ++proposals[i];
        ++ladder.attempted[i];
        if (unif(exchange_rng) < p) {
          ++ladder.accepted[i];
          swap_rows(lo.z1, hi.z1, c);
          swap_rows(lo.z2, hi.z2, c);
          std::swap(energies[i][c], energies[i + 1][c]);
        }
      }
    }
  }
  for (std::size_t i = 0; i + 1 < rungs; ++i)
    if (proposals[i] > 0) ladder.exchange_rates[i] = prob_sum[i] / static_cast<double>(proposals[i]);
}

double bridge_log_ratio(std::span<const double> e_a, std::span<const double> e_b, double d_beta,
                        std::size_t pair_index) {
  if (e_a.empty() || e_b.empty()) throw std::invalid_argument("bridge_log_ratio: empty sample");
  const double n_a = static_cast<double>(e_a.size());
  const double n_b = static_cast<double>(e_b.size());
  const double log_s_a = std::log(n_a / (n_a + n_b));
  const double log_s_b = std::log(n_b / (n_a + n_b));
  auto log_add = [](double x, double y) {
    const double m = std::max(x, y);
    return m + std::log1p(std::exp(-std::abs(x - y)));
  };

  // Simple importance sampling from the a-side as the starting point.
  LogSumExpAccumulator init;
  for (double e : e_a) init.add(-d_beta * e);
  double r = init.value() - std::log(n_a);

  for (int iter = 0; iter < 1000; ++iter) {
    LogSumExpAccumulator num, den;
    for (double e : e_a) {
      const double u = -d_beta * e;
      num.add(u - log_add(log_s_b + u, log_s_a + r));
    }
    for (double e : e_b) {
      const double u = -d_beta * e;
      den.add(-log_add(log_s_b + u, log_s_a + r));
    }
    const double next = (num.value() - std::log(n_a)) - (den.value() - std::log(n_b));
    if (!std::isfinite(next)) throw BridgeConvergenceError(pair_index);
    if (std::abs(next - r) < 1e-10) return next;
    r = next;
  }
  throw BridgeConvergenceError(pair_index);
}

namespace {

std::string rates_string(const std::vector<double>& rates) {
  std::ostringstream os;
  for (std::size_t i = 0; i < rates.size(); ++i) os << (i ? ", " : "") << rates[i];
  return os.str();
}

// Places `count` rungs at equal cumulative rejection between the current rungs.
std::vector<double> redistribute(const std::vector<double>& betas,
                                 const std::vector<double>& rates, std::size_t count) {
  std::vector<double> cum(betas.size(), 0.0);
  for (std::size_t i = 0; i + 1 < betas.size(); ++i)
    cum[i + 1] = cum[i] + std::max(1.0 - rates[i], 1e-6);
  std::vector<double> out(count);
  out.front() = 0.0;
  out.back() = 1.0;
  for (std::size_t k = 1; k + 1 < count; ++k) {
    const double target = cum.back() * static_cast<double>(k) / static_cast<double>(count - 1);
    std::size_t seg = 0;
    while (seg + 2 < cum.size() && cum[seg + 1] < target) ++seg;
    const double frac = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
    out[k] = betas[seg] + frac * (betas[seg + 1] - betas[seg]);
  }
  return out;
}

}  // namespace

TemperingLadder pilot_tune_ladder(const Rbm& rbm, double target_rate, std::size_t max_betas,
                                  const TemperingOptions& options) {
  if (!(target_rate > 0.0 && target_rate < 1.0))
    throw std::invalid_argument("pilot_tune_ladder: target rate must lie in (0, 1)");
  if (max_betas < 2) throw std::invalid_argument("pilot_tune_ladder: need at least two rungs");
  const double lo = target_rate - options.band, hi = target_rate + options.band;
  Rng rng(options.seed);
  std::vector<double> betas{0.0, 1.0};

  for (std::size_t round = 0; round < options.max_rounds; ++round) {
    TemperingLadder ladder =
        make_ladder(rbm, betas, options.chains_per_rung, options.seed + 7919 * (round + 1));
    run_tempering(rbm, ladder, options.pilot_burn_in, rng, true, nullptr);
    run_tempering(rbm, ladder, options.pilot_sweeps, rng, true, nullptr);
    const auto& rates = ladder.exchange_rates;

    const bool in_band = std::all_of(rates.begin(), rates.end(),
                                     [&](double r) { return r >= lo && r <= hi; });
    if (in_band || (betas.size() == 2 && rates[0] >= lo)) return ladder;

    double rejection = 0.0;
    for (double r : rates) rejection += 1.0 - r;
    // Round towards more rungs while any pair is below the band, fewer while any is above.
    const bool too_low = std::any_of(rates.begin(), rates.end(), [&](double r) { return r < lo; });
    const bool too_high = std::any_of(rates.begin(), rates.end(), [&](double r) { return r > hi; });
    const double intervals = rejection / (1.0 - target_rate);
    const double rounded = too_low && !too_high   ? std::ceil(intervals)
                           : too_high && !too_low ? std::floor(intervals)
                                                  : std::round(intervals);
    const auto wanted = static_cast<std::size_t>(std::max(1.0, rounded)) + 1;
    if (wanted > max_betas)
      throw LadderTuningError("pilot_tune_ladder: " + std::to_string(wanted) +
                                  " rungs needed but max_betas is " + std::to_string(max_betas) +
                                  "; achieved rates: " + rates_string(rates),
                              betas, rates);
    betas = redistribute(betas, rates, wanted);
  }
  TemperingLadder last = make_ladder(rbm, betas, options.chains_per_rung, options.seed);
  run_tempering(rbm, last, options.pilot_sweeps, rng, true, nullptr);
  throw LadderTuningError("pilot_tune_ladder: rates did not settle in band after " +
                              std::to_string(options.max_rounds) + " rounds; achieved rates: " +
                              rates_string(last.exchange_rates),
                          betas, last.exchange_rates);
}

LogZEstimate estimate_log_z(const Rbm& rbm, const TemperingLadder& ladder, std::size_t burn_in,
                            std::size_t sweeps, std::size_t runs, const TemperingOptions& options) {
  ladder.validate();
  if (burn_in == 0 || sweeps == 0 || runs == 0)
    throw std::invalid_argument("estimate_log_z: burn_in, sweeps and runs must be positive");
  const double log_z0 = static_cast<double>(rbm.n1() + rbm.n2()) * std::numbers::ln2;
  const std::size_t chains =
      ladder.chains.empty() ? options.chains_per_rung : ladder.chains.front().size();

  LogZEstimate out;
  for (std::size_t run = 0; run < runs; ++run) {
    const std::uint64_t seed = options.seed * 7777 + 104729 * (run + 1);
    TemperingLadder work = make_ladder(rbm, ladder.betas, chains, seed);
    Rng rng(seed ^ 0x5bd1e995ULL);
    run_tempering(rbm, work, burn_in, rng, options.exchange, nullptr);
    EnergyRecords records;
    run_tempering(rbm, work, sweeps, rng, options.exchange, &records);
    double log_z = log_z0;
    for (std::size_t i = 0; i + 1 < work.size(); ++i)
      log_z += bridge_log_ratio(records.by_rung[i], records.by_rung[i + 1],
                                work.betas[i + 1] - work.betas[i], i);
    out.runs.push_back(log_z);
  }
  out.mean = std::accumulate(out.runs.begin(), out.runs.end(), 0.0) / static_cast<double>(runs);
  if (runs > 1) {
    double ss = 0.0;
    for (double v : out.runs) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(runs - 1));
  }
  return out;
}

}  // namespace gumbolt
