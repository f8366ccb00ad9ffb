#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gumbolt/checkpoint.hpp"
#include "gumbolt/data.hpp"
#include "gumbolt/model.hpp"
#include "gumbolt/rbm.hpp"
#include "gumbolt/tempering.hpp"

namespace gumbolt {

/// Training protocol. Parsed from flat `key = value` text with `#` comments;
/// unknown keys are errors.
struct TrainConfig {
  std::string structure = "-";
  std::size_t k = 1;
  double tau = 1.0 / 7.0;
  std::size_t total_iters = 1000000;
  double lr0 = 3e-3;
  double lr_decay = 0.3;
  std::vector<double> lr_milestones{0.6, 0.75, 0.95};
  double kl_anneal_fraction = 0.30;
  std::size_t batch = 100;
  std::size_t pcd_sweeps = 200;
  std::size_t pcd_chains = 100;
  bool no_w = false;
  std::uint64_t seed = 1;
  std::string dataset = "mnist";
  std::size_t toy_size = 10000;
  std::uint64_t toy_seed = 7;
  std::size_t n1 = 0;  // 0 keeps the structure default
  std::size_t n2 = 0;
  std::size_t hidden_units = 200;
  std::size_t eval_k = 4000;
  std::string logz_preset = "desk";
  std::size_t valid_every = 1000;
  std::size_t valid_k = 20;
  std::size_t valid_size = 0;  // 0 uses the whole validation split
  std::string output_dir = "gumbolt_run";
  std::string data_dir;  // empty falls back to $GUMBOLT_DATA_DIR

  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
  std::string to_text() const;
  void validate() const;
  ModelConfig model_config(std::size_t input_dim) const;
};

double lr_at(std::size_t iter, const TrainConfig& config);
double kl_beta_at(std::size_t iter, const TrainConfig& config);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected ADAM update at step t >= 1.
void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, double lr, std::size_t t, const AdamSettings& settings = {});

struct AdamState {
  std::map<std::string, std::pair<Tensor, Tensor>> moments;  // name -> (m, v)
  std::size_t step = 0;
  AdamSettings settings;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& parameter)
      : std::runtime_error("non-finite gradient for parameter '" + parameter + "'"),
        parameter_(parameter) {}
  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

/// Updates every trainable parameter not in `frozen`. All gradients are
/// checked before any value changes.
void adam_step(ParameterStore& params, AdamState& state, double lr,
               const std::set<std::string>& frozen = {});

/// Name of the first trainable parameter with a non-finite gradient.
std::optional<std::string> first_nonfinite_grad(const ParameterStore& params);

struct MetricsRow {
  std::size_t iter = 0;
  double lr = 0.0;
  double kl_beta = 0.0;
  double train_f = 0.0;  // mean relaxed objective over the iterations since the last row
  double valid_l = 0.0;  // discrete bound, k = valid_k
  double valid_f = 0.0;  // relaxed objective at the training temperature, k = valid_k
  std::optional<double> log_z;  // exact; absent for RBMs too large to enumerate
};

std::string metrics_header();
std::string metrics_line(const MetricsRow& row);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::size_t iter, std::filesystem::path checkpoint)
      : std::runtime_error(what), iter_(iter), checkpoint_(std::move(checkpoint)) {}
  std::size_t iteration() const noexcept { return iter_; }
  const std::filesystem::path& checkpoint() const noexcept { return checkpoint_; }

 private:
  std::size_t iter_;
  std::filesystem::path checkpoint_;
};

/// RBMs whose smaller layer has at most this many units get exact log Z in
/// the training metrics.
inline constexpr std::size_t kTrackedLogZUnits = 16;

class Trainer {
 public:
  Trainer(TrainConfig config, Dataset data);
  /// Restores every piece of training state; `data` must match the checksum
  /// recorded in the checkpoint.
  Trainer(const CheckpointFile& checkpoint, Dataset data);

  /// One parameter update. Throws TrainingDiverged after writing the state
  /// from before the iteration to `<output_dir>/last_good.gbk`.
  void step();

  MetricsRow measure();

  /// Steps until `until` (capped at total_iters), calling `on_row` at
  /// iteration 0 (fresh runs only), every valid_every iterations and at the end.
  void run(std::size_t until, const std::function<void(const MetricsRow&)>& on_row);

  CheckpointFile checkpoint() const;
  void save(const std::filesystem::path& path) const { checkpoint().save(path); }

  std::size_t iteration() const noexcept { return iter_; }
  const TrainConfig& config() const noexcept { return config_; }
  const Dataset& data() const noexcept { return data_; }
  GumboltModel& model() noexcept { return model_; }
  const GumboltModel& model() const noexcept { return model_; }
  const PcdChains& chains() const noexcept { return chains_; }

 private:
  std::set<std::string> frozen() const;
  std::optional<double> tracked_log_z() const;
  [[noreturn]] void diverge(const std::string& why, const std::vector<Tensor>& buffers,
                            std::size_t epoch, std::size_t position);

  TrainConfig config_;
  Dataset data_;
  GumboltModel model_;
  Objective train_objective_;
  Objective valid_objective_;
  AdamState adam_;
  PcdChains chains_;
  BatchIterator batches_;
  std::size_t iter_ = 0;
  double f_sum_ = 0.0;
  std::size_t f_count_ = 0;
};

/// Runs a full training job: metrics.csv, timing.csv and checkpoints under
/// config.output_dir. Resumes from `resume` when given.
void train(const TrainConfig& config, const std::filesystem::path& data_dir,
           const std::optional<std::filesystem::path>& resume = std::nullopt,
           std::ostream* log = nullptr);

/// Model, config and image shape restored from a checkpoint.
struct LoadedModel {
  TrainConfig config;
  std::unique_ptr<GumboltModel> model;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
};
LoadedModel load_model(const CheckpointFile& checkpoint);

struct LogZReport {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> runs;
  std::string method;  // "exact" or the preset name
  std::vector<double> betas;
  bool above_threshold = false;
};

/// Exact when enumerable (smaller layer <= 20 units), else pilot-tuned
/// parallel tempering with bridge sampling under `preset`.
LogZReport model_log_z(const Rbm& rbm, const LogZPreset& preset, std::uint64_t seed,
                       bool allow_exact = true);

struct EvalResult {
  std::string dataset;
  std::string structure;
  std::size_t train_k = 0;
  std::size_t eval_k = 0;
  double nll_mean = 0.0;
  double nll_se = 0.0;
  LogZReport log_z;
  std::vector<std::string> warnings;
};

EvalResult evaluate(const CheckpointFile& checkpoint, const Tensor& test, std::size_t k,
                    const LogZPreset& preset, std::uint64_t seed, bool allow_exact = true);
std::string eval_header();
std::string eval_line(const EvalResult& result);

/// Decoded Bernoulli means for n RBM samples after 1000 burn-in sweeps.
inline constexpr std::size_t kSampleBurnIn = 1000;
Tensor sample_means(const GumboltModel& model, std::size_t n, std::uint64_t seed);
/// Writes images as binary PGM files sample_0000.pgm, ... and returns their paths.
std::vector<std::filesystem::path> write_pgm(const Tensor& means, std::size_t rows,
                                             std::size_t cols, const std::filesystem::path& dir);

}  // namespace gumbolt
