#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gumbolt/autodiff.hpp"
#include "gumbolt/rbm.hpp"

namespace gumbolt {

/// Encoder/decoder layout. The structure symbols "-", "~", "- -", "~ ~" map to
/// one or two stochastic layers in the encoder, linear ("-") or one hidden
/// tanh layer ("~") per network.
struct ModelConfig {
  std::string structure = "-";
  std::size_t input_dim = 784;
  std::size_t n1 = 100;
  std::size_t n2 = 100;
  std::size_t hierarchies = 1;
  std::size_t encoder_hidden_layers = 0;
  std::size_t decoder_hidden_layers = 0;
  std::size_t hidden_units = 200;
  bool encoder_batch_norm = true;
  bool decoder_batch_norm = true;

  /// Latent sizes 100+100 for one symbol, 200+200 for two.
  static ModelConfig from_structure(const std::string& symbol, std::size_t input_dim);

  /// Widths of the stochastic layers in encoder order.
  std::vector<std::size_t> latent_widths() const;
  void validate() const;
};

/// Normalises the accepted spellings ("-", "−", "~", "- -", "~~", ...) to one of
/// "-", "~", "--", "~~". Throws on anything else.
std::string canonical_structure(const std::string& symbol);

/// Stack of affine -> [batch-norm] -> tanh blocks followed by an affine head.
class Network {
 public:
  Network() = default;
  Network(ParameterStore& store, const std::string& prefix, std::size_t in_dim,
          std::size_t out_dim, std::size_t hidden_layers, std::size_t hidden_units,
          bool batch_norm);

  NodeId build(Graph& graph, NodeId x, BatchNormMode mode) const;

  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t out_dim() const noexcept { return out_dim_; }

 private:
  struct Block {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;
    Parameter* running_mean = nullptr;
    Parameter* running_var = nullptr;
  };
  std::vector<Block> hidden_;
  Block head_;
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
};

/// Encoders, decoder and RBM prior sharing one parameter store.
class GumboltModel {
 public:
  // Networks get scaled-uniform weights from `seed`; the RBM starts at zero.
  GumboltModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  Parameter& rbm_a() { return *rbm_a_; }
  Parameter& rbm_b() { return *rbm_b_; }
  Parameter& rbm_w() { return *rbm_w_; }
  Rbm rbm() const;
  void set_rbm(const Rbm& rbm);

  // Zeroes every network weight and bias and resets batch-norm to identity.
  void zero_networks();

  const std::vector<Network>& encoders() const noexcept { return encoders_; }
  const Network& decoder() const noexcept { return decoder_; }

 private:
  ModelConfig config_;
  ParameterStore params_;
  std::vector<Network> encoders_;
  Network decoder_;
  Parameter* rbm_a_ = nullptr;
  Parameter* rbm_b_ = nullptr;
  Parameter* rbm_w_ = nullptr;
};

/// Per-hierarchy logistic noise logit(rho) with rho clamped, one tensor per
/// stochastic layer, rows ordered datapoint-major (row = datapoint * k + sample).
using NoiseBatch = std::vector<Tensor>;

/// Noise for `datapoints` consecutive datapoints starting at `first_index`,
/// each drawn from its own stream derived from (seed, datapoint index).
NoiseBatch draw_noise(const ModelConfig& config, std::uint64_t seed, std::size_t first_index,
                      std::size_t datapoints, std::size_t samples);

struct ObjectiveValue {
  double objective = 0.0;  // mean over the batch of logsumexp(log w) - log k, excluding log Z
  double loss = 0.0;       // -objective
  Tensor log_weights;      // [batch x k]
  Tensor per_datapoint;    // [batch]
  double autoencoding = 0.0;  // mean log p(x | zeta)
  double prior = 0.0;         // mean -E(zeta)
  double entropy = 0.0;       // mean -log q(zeta | x)
};

/// The relaxed importance-weighted objective as a differentiable graph for a
/// fixed batch size, k and temperature (tau = 0 gives discrete samples).
class Objective {
 public:
  Objective(GumboltModel& model, std::size_t k, double tau, BatchNormMode mode);

  /// Evaluates for batch `x` with pre-drawn noise. With `backward` the
  /// gradient of the loss (times 1) is accumulated into the model parameters.
  ObjectiveValue evaluate(const Tensor& x, const NoiseBatch& noise, double kl_beta,
                          bool backward);

  /// Draws noise from `seed` first.
  ObjectiveValue evaluate(const Tensor& x, std::uint64_t seed, double kl_beta, bool backward);

  std::size_t k() const noexcept { return k_; }
  double tau() const noexcept { return tau_; }

 private:
  struct Built {
    Graph graph;
    NodeId loss, objective, log_weights, per_datapoint, log_px, neg_energy, log_q;
  };
  Built& graph_for(std::size_t batch);

  GumboltModel& model_;
  std::size_t k_;
  double tau_;
  BatchNormMode mode_;
  std::map<std::size_t, std::unique_ptr<Built>> graphs_;
};

/// One-shot convenience wrapper around Objective.
ObjectiveValue gumbolt_objective(GumboltModel& model, const Tensor& x, std::size_t k, double tau,
                                 double kl_beta, std::uint64_t seed, BatchNormMode mode,
                                 bool backward = false);

struct BoundOptions {
  std::size_t chunk = 100;
  bool parallel = true;
};

/// Discrete (tau = 0) k-sample importance-weighted bound on log p(x) for each
/// row of `x`, with batch-norm in evaluation mode: logsumexp over k samples of
/// [-E(z) + log p(x|z) - log q(z|x)] - log k - log_z. Samples are drawn in
/// chunks and merged with a running logsumexp.
std::vector<double> discrete_iw_bound(const GumboltModel& model, const Tensor& x, std::size_t k,
                                      double log_z, std::uint64_t seed,
                                      const BoundOptions& options = {});

struct Encoding {
  std::vector<Tensor> zetas;  // per hierarchy, [rows x width]
  std::vector<Tensor> means;  // posterior means q = sigmoid(logits)
  Tensor log_q;               // [rows], summed over hierarchies
};

/// Runs the encoders on `x` with one noise row per input row (k = 1):
/// relaxed samples at tau > 0, discrete samples at tau = 0.
Encoding encode(const GumboltModel& model, const Tensor& x, const NoiseBatch& noise, double tau,
                BatchNormMode mode = BatchNormMode::kEval);

/// Bernoulli pixel means decoded from latent states (rows of z1 | z2).
Tensor decode_means(const GumboltModel& model, const Tensor& z1, const Tensor& z2);

/// Pixel logits from the decoder in evaluation mode.
Tensor decode_logits(const GumboltModel& model, const Tensor& zeta);

}  // namespace gumbolt
