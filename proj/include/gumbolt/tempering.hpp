#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gumbolt/rbm.hpp"

namespace gumbolt {

/// Inverse temperatures 0 = beta_0 < ... < beta_last = 1, with one set of
/// chains per rung and exchange statistics per adjacent pair.
struct TemperingLadder {
  std::vector<double> betas;
  std::vector<PcdChains> chains;
  std::vector<std::size_t> attempted;
  std::vector<std::size_t> accepted;
  // Mean Metropolis acceptance probability per adjacent pair, measured over
  // the most recent window. Lower variance than accepted / attempted.
  std::vector<double> exchange_rates;

  std::size_t size() const noexcept { return betas.size(); }
  void validate() const;
};

/// Energies recorded at every rung; pair (i, i+1) bridges rungs i and i+1.
struct EnergyRecords {
  std::vector<std::vector<double>> by_rung;
};

struct TemperingOptions {
  std::size_t chains_per_rung = 32;
  std::size_t pilot_burn_in = 200;
  std::size_t pilot_sweeps = 1000;
  std::size_t max_rounds = 16;
  double band = 0.15;
  bool exchange = true;
  std::uint64_t seed = 1;
};

struct LogZPreset {
  std::string name;
  std::size_t burn_in;
  std::size_t sweeps;
  std::size_t runs;
  double std_threshold;
};

LogZPreset desk_preset();
LogZPreset paper_preset();
LogZPreset preset_by_name(const std::string& name);

class LadderTuningError : public std::runtime_error {
 public:
  LadderTuningError(const std::string& what, std::vector<double> betas, std::vector<double> rates)
      : std::runtime_error(what), betas_(std::move(betas)), rates_(std::move(rates)) {}
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& rates() const noexcept { return rates_; }

 private:
  std::vector<double> betas_;
  std::vector<double> rates_;
};

class BridgeConvergenceError : public std::runtime_error {
 public:
  BridgeConvergenceError(std::size_t pair)
      : std::runtime_error("bridge sampling did not converge for pair " + std::to_string(pair)),
        pair_(pair) {}
  std::size_t pair() const noexcept { return pair_; }

 private:
  std::size_t pair_;
};

/// Builds a ladder whose adjacent exchange rates lie within target +- band.
/// A two-rung ladder {0, 1} is accepted whenever its rate is at least
/// target - band, since it cannot be thinned further.
TemperingLadder pilot_tune_ladder(const Rbm& rbm, double target_rate, std::size_t max_betas,
                                  const TemperingOptions& options = {});

/// A ladder with the given rungs and fresh chains.
TemperingLadder make_ladder(const Rbm& rbm, std::vector<double> betas, std::size_t chains_per_rung,
                            std::uint64_t seed);

/// Runs `sweeps` tempering iterations: a Gibbs sweep at every rung followed by
/// replica-exchange proposals over alternating even/odd pairs. Appends energies
/// to `records` when given.
void run_tempering(const Rbm& rbm, TemperingLadder& ladder, std::size_t sweeps, Rng& exchange_rng,
                   bool exchange, EnergyRecords* records);

/// Bennett acceptance ratio estimate of log(Z_b / Z_a) from energies sampled at
/// inverse temperatures a (`e_a`) and b (`e_b`), d_beta = b - a.
double bridge_log_ratio(std::span<const double> e_a, std::span<const double> e_b, double d_beta,
                        std::size_t pair_index = 0);

struct LogZEstimate {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> runs;
};

LogZEstimate estimate_log_z(const Rbm& rbm, const TemperingLadder& ladder, std::size_t burn_in,
                            std::size_t sweeps, std::size_t runs,
                            const TemperingOptions& options = {});

}  // namespace gumbolt
