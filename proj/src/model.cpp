#include "gumbolt/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gumbolt/numeric.hpp"
#include "gumbolt/relaxation.hpp"
#include "kernel_impl.hpp"

namespace gumbolt {

std::string canonical_structure(const std::string& symbol) {
  std::string s;
  for (std::size_t i = 0; i < symbol.size();) {
    const unsigned char c = static_cast<unsigned char>(symbol[i]);
    if (c == ' ') {
      ++i;
    } else if (symbol.compare(i, 3, "\xE2\x88\x92") == 0) {  // U+2212 minus sign
      s += '-';
      i += 3;
    } else if (symbol.compare(i, 3, "\xE2\x88\xBC") == 0) {  // U+223C tilde operator
      s += '~';
      i += 3;
    } else if (c == '-' || c == '~') {
      s += static_cast<char>(c);
      ++i;
    } else {
      throw std::invalid_argument("unknown structure symbol '" + symbol + "'");
    }
  }
  if (s != "-" && s != "~" && s != "--" && s != "~~")
    throw std::invalid_argument("unknown structure symbol '" + symbol + "'");
  return s;
}

ModelConfig ModelConfig::from_structure(const std::string& symbol, std::size_t input_dim) {
  ModelConfig c;
  c.structure = canonical_structure(symbol);
  c.input_dim = input_dim;
  c.hierarchies = c.structure.size();
  const bool nonlinear = c.structure[0] == '~';
  c.encoder_hidden_layers = nonlinear ? 1 : 0;
  c.decoder_hidden_layers = nonlinear ? 1 : 0;
  c.n1 = c.n2 = c.hierarchies == 1 ? 100 : 200;
  return c;
}

std::vector<std::size_t> ModelConfig::latent_widths() const {
  if (hierarchies == 1) return {n1 + n2};
  return {n1, n2};
}

void ModelConfig::validate() const {
  if (hierarchies != 1 && hierarchies != 2)
    throw std::invalid_argument("model: hierarchies must be 1 or 2");
  if (input_dim == 0 || n1 == 0 || n2 == 0) throw std::invalid_argument("model: empty layer");
  if ((encoder_hidden_layers || decoder_hidden_layers) && hidden_units == 0)
    throw std::invalid_argument("model: hidden layers need hidden_units > 0");
}

// ---------------------------------------------------------------------------

Network::Network(ParameterStore& store, const std::string& prefix, std::size_t in_dim,
                 std::size_t out_dim, std::size_t hidden_layers, std::size_t hidden_units,
                 bool batch_norm)
    : in_dim_(in_dim), out_dim_(out_dim) {
  std::size_t width = in_dim;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    const std::string p = prefix + ".h" + std::to_string(l);
    Block b;
    b.weight = &store.add(p + ".w", Tensor({width, hidden_units}));
    b.bias = &store.add(p + ".b", Tensor({hidden_units}));
    if (batch_norm) {
      b.gamma = &store.add(p + ".bn.gamma", Tensor({hidden_units}, 1.0));
      b.beta = &store.add(p + ".bn.beta", Tensor({hidden_units}));
      b.running_mean = &store.add(p + ".bn.mean", Tensor({hidden_units}), false);
      b.running_var = &store.add(p + ".bn.var", Tensor({hidden_units}, 1.0), false);
    }
    hidden_.push_back(b);
    width = hidden_units;
  }
  head_.weight = &store.add(prefix + ".out.w", Tensor({width, out_dim}));
  head_.bias = &store.add(prefix + ".out.b", Tensor({out_dim}));
}

NodeId Network::build(Graph& graph, NodeId x, BatchNormMode mode) const {
  NodeId h = x;
  for (const Block& b : hidden_) {
    h = graph.affine(h, graph.parameter(*b.weight), graph.parameter(*b.bias));
    if (b.gamma)
      h = graph.batch_norm(h, *b.gamma, *b.beta, *b.running_mean, *b.running_var, mode);
    h = graph.tanh(h);
  }
  return graph.affine(h, graph.parameter(*head_.weight), graph.parameter(*head_.bias));
}

// ---------------------------------------------------------------------------

GumboltModel::GumboltModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto widths = config_.latent_widths();
  std::size_t in = config_.input_dim;
  for (std::size_t h = 0; h < widths.size(); ++h) {
    encoders_.emplace_back(params_, "enc" + std::to_string(h), in, widths[h],
                           config_.encoder_hidden_layers, config_.hidden_units,
                           config_.encoder_batch_norm);
    in = config_.input_dim + widths[0];
  }
  decoder_ = Network(params_, "dec", config_.n1 + config_.n2, config_.input_dim,
                     config_.decoder_hidden_layers, config_.hidden_units,
                     config_.decoder_batch_norm);
  rbm_a_ = &params_.add("rbm.a", Tensor({config_.n1, 1}));
  rbm_b_ = &params_.add("rbm.b", Tensor({config_.n2, 1}));
  rbm_w_ = &params_.add("rbm.W", Tensor({config_.n2, config_.n1}));

  Rng rng = kernels::detail::block_rng(seed, 0x1417);
  for (auto& p : params_) {
    const auto& n = p->name;
    if (n.size() < 2 || n.compare(n.size() - 2, 2, ".w") != 0) continue;
    const double fan_in = static_cast<double>(p->value.rows());
    const double fan_out = static_cast<double>(p->value.cols());
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-s, s);
    for (auto& v : p->value.values()) v = dist(rng);
  }
}

Rbm GumboltModel::rbm() const {
  Rbm r;
  r.a = rbm_a_->value.reshaped({config_.n1});
  r.b = rbm_b_->value.reshaped({config_.n2});
  r.W = rbm_w_->value;
  return r;
}

void GumboltModel::set_rbm(const Rbm& rbm) {
  if (rbm.n1() != config_.n1 || rbm.n2() != config_.n2)
    throw std::invalid_argument("set_rbm: size mismatch");
  rbm_a_->value = rbm.a.reshaped({config_.n1, 1});
  rbm_b_->value = rbm.b.reshaped({config_.n2, 1});
  rbm_w_->value = rbm.W;
}

void GumboltModel::zero_networks() {
  for (auto& p : params_) {
    if (p->name.rfind("rbm.", 0) == 0) continue;
    const bool ones = p->name.ends_with(".bn.gamma") || p->name.ends_with(".bn.var");
    p->value.fill(ones ? 1.0 : 0.0);
  }
}

// ---------------------------------------------------------------------------

NoiseBatch draw_noise(const ModelConfig& config, std::uint64_t seed, std::size_t first_index,
                      std::size_t datapoints, std::size_t samples) {
  const auto widths = config.latent_widths();
  NoiseBatch noise;
  for (std::size_t w : widths) noise.emplace_back(Tensor({datapoints * samples, w}));
  for (std::size_t d = 0; d < datapoints; ++d) {
    Rng rng = kernels::detail::block_rng(seed, first_index + d);
    for (std::size_t h = 0; h < widths.size(); ++h)
      for (std::size_t s = 0; s < samples; ++s)
        for (auto& v : noise[h].row(d * samples + s))
          v = logit(clamp_noise(kernels::detail::uniform01(rng)));
  }
  return noise;
}

namespace {

// Shared forward structure used for training and evaluation graphs.
struct ObjectiveNodes {
  NodeId log_w, log_px, neg_energy, log_q;
};

ObjectiveNodes build_log_weights(Graph& g, GumboltModel& model, std::size_t k, double tau,
                                 BatchNormMode mode) {
  const ModelConfig& c = model.config();
  const auto widths = c.latent_widths();
  NodeId x = g.input("x");
  NodeId beta = g.input("kl_beta");
  NodeId x_rep = g.repeat_rows(x, k);

  std::vector<NodeId> zetas;
  NodeId log_q{};
  for (std::size_t h = 0; h < widths.size(); ++h) {
    NodeId logits;
    if (h == 0) {
      logits = g.repeat_rows(model.encoders()[0].build(g, x, mode), k);
    } else {
      logits = model.encoders()[h].build(g, g.concat(x_rep, zetas[0]), mode);
    }
    NodeId pre = g.add(logits, g.input("noise" + std::to_string(h)));
    NodeId zeta = tau > 0.0 ? g.sigmoid(g.scale(pre, 1.0 / tau)) : g.heaviside(pre);
    zetas.push_back(zeta);
    // zeta log q + (1 - zeta) log(1 - q) = zeta * l - softplus(l)
    NodeId lq = g.row_sum(g.sub(g.mul(zeta, logits), g.softplus(logits)));
    log_q = h == 0 ? lq : g.add(log_q, lq);
  }
  NodeId z1, z2;
  if (widths.size() == 1) {
    z1 = g.slice(zetas[0], 0, c.n1);
    z2 = g.slice(zetas[0], c.n1, c.n1 + c.n2);
  } else {
    z1 = zetas[0];
    z2 = zetas[1];
  }
  NodeId a = g.parameter(model.rbm_a());
  NodeId b = g.parameter(model.rbm_b());
  NodeId w = g.parameter(model.rbm_w());
  NodeId neg_energy = g.add(g.add(g.matmul(z1, a), g.matmul(z2, b)),
                            g.row_sum(g.mul(g.matmul(z2, w), z1)));

  NodeId out = model.decoder().build(g, g.concat(z1, z2), mode);
  NodeId log_px = g.row_sum(g.sub(g.mul(x_rep, out), g.softplus(out)));
  NodeId log_w = g.add(log_px, g.mul(beta, g.sub(neg_energy, log_q)));
  return {log_w, log_px, neg_energy, log_q};
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return t.size() ? s / static_cast<double>(t.size()) : 0.0;
}

}  // namespace

Objective::Objective(GumboltModel& model, std::size_t k, double tau, BatchNormMode mode)
    : model_(model), k_(k), tau_(tau), mode_(mode) {
  if (k == 0) throw std::invalid_argument("objective: k must be at least 1");
  if (!(tau >= 0.0)) throw std::invalid_argument("objective: tau must be non-negative");
}

Objective::Built& Objective::graph_for(std::size_t batch) {
  auto& slot = graphs_[batch];
  if (!slot) {
    slot = std::make_unique<Built>();
    Graph& g = slot->graph;
    ObjectiveNodes n = build_log_weights(g, model_, k_, tau_, mode_);
    slot->log_px = n.log_px;
    slot->neg_energy = n.neg_energy;
    slot->log_q = n.log_q;
    slot->log_weights = g.reshape(n.log_w, batch, k_);
    slot->per_datapoint =
        g.add_scalar(g.logsumexp(slot->log_weights, 1), -std::log(static_cast<double>(k_)));
    slot->objective = g.mean(slot->per_datapoint);
    slot->loss = g.scale(slot->objective, -1.0);
  }
  return *slot;
}

ObjectiveValue Objective::evaluate(const Tensor& x, const NoiseBatch& noise, double kl_beta,
                                   bool backward) {
  const std::size_t batch = x.rows();
  if (x.cols() != model_.config().input_dim)
    throw std::invalid_argument("objective: input has " + std::to_string(x.cols()) +
                                " columns, model expects " +
                                std::to_string(model_.config().input_dim));
  Built& b = graph_for(batch);
  std::map<std::string, Tensor> inputs{{"x", x},
                                       {"kl_beta", Tensor({batch * k_, 1}, kl_beta)}};
  for (std::size_t h = 0; h < noise.size(); ++h) inputs["noise" + std::to_string(h)] = noise[h];
  try {
    b.graph.forward(inputs);
  } catch (const GraphError& e) {
    if (e.row() != GraphError::kNoRow && e.row() < batch * k_)
      throw std::domain_error(std::string("objective: non-finite log weight for datapoint ") +
                              std::to_string(e.row() / k_) + ", sample " +
                              std::to_string(e.row() % k_) + " (" + e.what() + ")");
    throw;
  }
  if (backward) b.graph.backward(b.loss);

  ObjectiveValue v;
  v.objective = b.graph.value(b.objective)[0];
  v.loss = -v.objective;
  v.log_weights = b.graph.value(b.log_weights);
  v.per_datapoint = b.graph.value(b.per_datapoint).reshaped({batch});
  v.autoencoding = mean_of(b.graph.value(b.log_px));
  v.prior = mean_of(b.graph.value(b.neg_energy));
  v.entropy = -mean_of(b.graph.value(b.log_q));
  return v;
}

ObjectiveValue Objective::evaluate(const Tensor& x, std::uint64_t seed, double kl_beta,
                                   bool backward) {
  return evaluate(x, draw_noise(model_.config(), seed, 0, x.rows(), k_), kl_beta, backward);
}

ObjectiveValue gumbolt_objective(GumboltModel& model, const Tensor& x, std::size_t k, double tau,
                                 double kl_beta, std::uint64_t seed, BatchNormMode mode,
                                 bool backward) {
  Objective obj(model, k, tau, mode);
  return obj.evaluate(x, seed, kl_beta, backward);
}

// ---------------------------------------------------------------------------

std::vector<double> discrete_iw_bound(const GumboltModel& model, const Tensor& x, std::size_t k,
                                      double log_z, std::uint64_t seed,
                                      const BoundOptions& options) {
  if (k == 0 || options.chunk == 0) throw std::invalid_argument("discrete_iw_bound: k and chunk must be positive");
  const ModelConfig& c = model.config();
  if (x.cols() != c.input_dim) throw std::invalid_argument("discrete_iw_bound: input width mismatch");
  // Evaluation-mode graphs only read parameters, so sharing them across threads is safe.
  auto& mutable_model = const_cast<GumboltModel&>(model);
  const std::size_t n = x.rows();
  const std::size_t chunk = std::min(options.chunk, k);
  const double log_k = std::log(static_cast<double>(k));
  std::vector<double> out(n);
  const auto widths = c.latent_widths();

  auto evaluate_rows = [&](std::size_t lo, std::size_t hi) {
    std::map<std::size_t, std::unique_ptr<std::pair<Graph, NodeId>>> graphs;
    auto graph_for = [&](std::size_t samples) -> std::pair<Graph, NodeId>& {
      auto& slot = graphs[samples];
      if (!slot) {
        slot = std::make_unique<std::pair<Graph, NodeId>>();
        slot->second = build_log_weights(slot->first, mutable_model, samples, 0.0,
                                         BatchNormMode::kEval).log_w;
      }
      return *slot;
    };
    for (std::size_t d = lo; d < hi; ++d) {
      Rng rng = kernels::detail::block_rng(seed, d);
      LogSumExpAccumulator acc;
      Tensor xd({1, c.input_dim});
      std::copy(x.row(d).begin(), x.row(d).end(), xd.data());
      for (std::size_t done = 0; done < k; done += chunk) {
        const std::size_t m = std::min(chunk, k - done);
        auto& [g, log_w] = graph_for(m);
        std::map<std::string, Tensor> inputs{{"x", xd}, {"kl_beta", Tensor({m, 1}, 1.0)}};
        for (std::size_t h = 0; h < widths.size(); ++h) {
          Tensor noise({m, widths[h]});
          for (auto& v : noise.values()) v = logit(clamp_noise(kernels::detail::uniform01(rng)));
          inputs["noise" + std::to_string(h)] = std::move(noise);
        }
        try {
          g.forward(inputs);
        } catch (const GraphError& e) {
          throw std::domain_error("discrete_iw_bound: datapoint " + std::to_string(d) + ": " +
                                  e.what());
        }
        for (double v : g.value(log_w).values()) acc.add(v);
      }
      out[d] = acc.value() - log_k - log_z;
      if (!std::isfinite(out[d]))
        throw std::domain_error("discrete_iw_bound: non-finite bound for datapoint " +
                                std::to_string(d));
    }
  };

  if (options.parallel) {
    std::exception_ptr error;
#pragma omp parallel
    {
      try {
#ifdef _OPENMP
        const std::size_t threads = static_cast<std::size_t>(omp_get_num_threads());
        const std::size_t id = static_cast<std::size_t>(omp_get_thread_num());
#else
        const std::size_t threads = 1, id = 0;
#endif
        const std::size_t per = (n + threads - 1) / threads;
        evaluate_rows(std::min(n, id * per), std::min(n, (id + 1) * per));
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    evaluate_rows(0, n);
  }
  return out;
}

Encoding encode(const GumboltModel& model, const Tensor& x, const NoiseBatch& noise, double tau,
                BatchNormMode mode) {
  if (!(tau >= 0.0)) throw std::invalid_argument("encode: tau must be non-negative");
  const ModelConfig& c = model.config();
  const auto widths = c.latent_widths();
  if (noise.size() != widths.size()) throw std::invalid_argument("encode: one noise tensor per hierarchy");
  auto& mutable_model = const_cast<GumboltModel&>(model);
  Graph g;
  NodeId xn = g.input("x");
  std::vector<NodeId> zetas, means;
  NodeId log_q{};
  for (std::size_t h = 0; h < widths.size(); ++h) {
    NodeId logits = h == 0 ? mutable_model.encoders()[0].build(g, xn, mode)
                           : mutable_model.encoders()[h].build(g, g.concat(xn, zetas[0]), mode);
    NodeId pre = g.add(logits, g.input("noise" + std::to_string(h)));
    NodeId zeta = tau > 0.0 ? g.sigmoid(g.scale(pre, 1.0 / tau)) : g.heaviside(pre);
    zetas.push_back(zeta);
    means.push_back(g.sigmoid(logits));
    NodeId lq = g.row_sum(g.sub(g.mul(zeta, logits), g.softplus(logits)));
    log_q = h == 0 ? lq : g.add(log_q, lq);
  }
  std::map<std::string, Tensor> inputs{{"x", x}};
  for (std::size_t h = 0; h < noise.size(); ++h) inputs["noise" + std::to_string(h)] = noise[h];
  g.forward(inputs);
  Encoding e;
  for (std::size_t h = 0; h < widths.size(); ++h) {
    e.zetas.push_back(g.value(zetas[h]));
    e.means.push_back(g.value(means[h]));
  }
  e.log_q = g.value(log_q).reshaped({x.rows()});
  return e;
}

Tensor decode_logits(const GumboltModel& model, const Tensor& zeta) {
  auto& mutable_model = const_cast<GumboltModel&>(model);
  Graph g;
  NodeId out = mutable_model.decoder().build(g, g.input("z"), BatchNormMode::kEval);
  g.forward({{"z", zeta}});
  return g.value(out);
}

Tensor decode_means(const GumboltModel& model, const Tensor& z1, const Tensor& z2) {
  if (z1.rows() != z2.rows()) throw std::invalid_argument("decode_means: row mismatch");
  const std::size_t rows = z1.rows(), n1 = z1.cols(), n2 = z2.cols();
  Tensor zeta({rows, n1 + n2});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(z1.row(r).begin(), z1.row(r).end(), zeta.row(r).begin());
    std::copy(z2.row(r).begin(), z2.row(r).end(), zeta.row(r).begin() + n1);
  }
  Tensor logits = decode_logits(model, zeta);
  for (auto& v : logits.values()) v = sigmoid(v);
  return logits;
}

}  // namespace gumbolt
