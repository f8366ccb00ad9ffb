#include "gumbolt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "gumbolt/autodiff.hpp"
#include "gumbolt/model.hpp"
#include "gumbolt/rbm.hpp"
#include "gumbolt/relaxation.hpp"
#include "gumbolt/tempering.hpp"

namespace gumbolt {

namespace {

std::string format(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Small RBM with n1 + n2 <= 6 and both layers non-empty.
Rbm small_rbm(Rng& rng) {
  std::uniform_int_distribution<std::size_t> total(2, 6);
  const std::size_t n = total(rng);
  const std::size_t n1 = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
  return Rbm::random(n1, n - n1, 1.0, 1.0, rng);
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const VerifyEntry& e) { return e.passed; });
}

std::string VerifyReport::text() const {
  std::ostringstream os;
  std::size_t ok = 0;
  for (const auto& e : entries) {
    os << (e.passed ? "PASS " : "FAIL ") << e.suite << "/" << e.name << ": " << e.detail << "\n";
    ok += e.passed;
  }
  os << "summary: " << ok << "/" << entries.size() << " passed\n";
  return os.str();
}

VerifyReport verify_theorems(std::uint64_t seed) {
  VerifyReport r;
  Rng rng(seed);

  std::size_t extrema_ok = 0;
  for (int i = 0; i < 100; ++i) extrema_ok += check_vertex_extrema(small_rbm(rng), 0.25).passed;
  r.entries.push_back({"theorems", "vertex-extrema", extrema_ok == 100,
                       std::to_string(extrema_ok) + "/100 random RBMs attain grid extrema at vertices"});

  std::size_t bound_ok = 0;
  for (int i = 0; i < 100; ++i)
    bound_ok += check_relaxed_partition(small_rbm(rng), 1 << 16, seed * 1000 + i).passed;
  r.entries.push_back({"theorems", "relaxed-partition-bound", bound_ok >= 99,
                       std::to_string(bound_ok) + "/100 random RBMs have 99% upper bound <= Z"});

  ModelConfig mc = ModelConfig::from_structure("-", 16);
  mc.n1 = mc.n2 = 4;
  GumboltModel model(mc, seed);
  model.set_rbm(Rbm::random(4, 4, 1.0, 1.0, rng));
  Tensor x({6, 16});
  for (auto& v : x.values()) v = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
  for (std::size_t k : {1, 5, 20}) {
    Objective objective(model, k, 0.0, BatchNormMode::kEval);
    const auto relaxed = objective.evaluate(x, seed + k, 1.0, false);
    const auto discrete = discrete_iw_bound(model, x, k, 0.0, seed + k, {100, false});
    double worst = 0.0;
    for (std::size_t b = 0; b < x.rows(); ++b)
      worst = std::max(worst, std::abs(relaxed.per_datapoint[b] - discrete[b]));
    r.entries.push_back({"theorems", "tau0-consistency-k" + std::to_string(k), worst < 1e-10,
                         format("max |difference| %.3g", worst)});
  }
  return r;
}

VerifyReport verify_gradients(std::uint64_t seed) {
  VerifyReport r;
  Rng rng(seed);
  constexpr double kStep = 1e-6, kTol = 1e-4;

  using Builder = std::function<NodeId(Graph&, NodeId, NodeId)>;
  const std::vector<std::pair<std::string, Builder>> ops = {
      {"matmul", [](Graph& g, NodeId p, NodeId q) { return g.matmul(p, g.reshape(q, 4, 3)); }},
      {"affine", [](Graph& g, NodeId p, NodeId q) { return g.affine(p, g.reshape(q, 4, 3), g.slice(g.reshape(p, 1, 12), 0, 3)); }},
      {"add_row", [](Graph& g, NodeId p, NodeId q) { return g.add_row(p, g.slice(g.reshape(q, 1, 12), 0, 4)); }},
      {"add", [](Graph& g, NodeId p, NodeId q) { return g.add(p, q); }},
      {"sub", [](Graph& g, NodeId p, NodeId q) { return g.sub(p, q); }},
      {"mul", [](Graph& g, NodeId p, NodeId q) { return g.mul(p, q); }},
      {"scale", [](Graph& g, NodeId p, NodeId) { return g.scale(p, -1.7); }},
      {"add_scalar", [](Graph& g, NodeId p, NodeId q) { return g.mul(g.add_scalar(p, 0.3), q); }},
      {"sigmoid", [](Graph& g, NodeId p, NodeId) { return g.sigmoid(p); }},
      {"tanh", [](Graph& g, NodeId p, NodeId) { return g.tanh(p); }},
      {"log", [](Graph& g, NodeId p, NodeId) { return g.log(g.add_scalar(g.exp(p), 0.5)); }},
      {"exp", [](Graph& g, NodeId p, NodeId) { return g.exp(p); }},
      {"softplus", [](Graph& g, NodeId p, NodeId) { return g.softplus(p); }},
      {"logsumexp-rows", [](Graph& g, NodeId p, NodeId) { return g.logsumexp(p, 1); }},
      {"logsumexp-cols", [](Graph& g, NodeId p, NodeId) { return g.logsumexp(p, 0); }},
      {"row_sum", [](Graph& g, NodeId p, NodeId q) { return g.row_sum(g.mul(p, q)); }},
      {"sum", [](Graph& g, NodeId p, NodeId q) { return g.sum(g.mul(p, q)); }},
      {"mean", [](Graph& g, NodeId p, NodeId q) { return g.mean(g.mul(p, q)); }},
      {"concat", [](Graph& g, NodeId p, NodeId q) { return g.concat(p, g.exp(q)); }},
      {"slice", [](Graph& g, NodeId p, NodeId) { return g.slice(p, 1, 3); }},
      {"repeat_rows", [](Graph& g, NodeId p, NodeId) { return g.repeat_rows(p, 3); }},
      {"reshape", [](Graph& g, NodeId p, NodeId) { return g.reshape(p, 2, 6); }},
      {"heaviside", [](Graph& g, NodeId p, NodeId q) { return g.add(g.heaviside(p), q); }},
  };
  for (const auto& [name, build] : ops) {
    Parameter p{"p", random_tensor({3, 4}, rng), Tensor({3, 4})};
    Parameter q{"q", random_tensor({3, 4}, rng), Tensor({3, 4})};
    Graph g;
    NodeId out_node = build(g, g.parameter(p), g.parameter(q));
    // Weight the output by fixed random coefficients so no symmetry hides an error.
    g.forward({});
    Tensor weights = random_tensor(g.value(out_node).shape(), rng);
    NodeId loss = g.sum(g.mul(out_node, g.constant(weights)));
    Parameter* params[] = {&p, &q};
    const double err = grad_check_graph(g, loss, {}, params, kStep);
    r.entries.push_back({"grad", name, err < kTol, format("max relative error %.3g", err)});
  }

  {
    // Identity forward, no gradient to its input.
    Parameter p{"p", random_tensor({3, 4}, rng), Tensor({3, 4})};
    Graph g;
    NodeId id = g.parameter(p);
    NodeId stopped = g.stop_gradient(id);
    NodeId loss = g.sum(g.mul(stopped, stopped));
    g.forward({});
    g.backward(loss);
    const bool same = g.value(stopped) == p.value;
    double leak = 0.0;
    for (double v : g.grad(id).values()) leak = std::max(leak, std::abs(v));
    r.entries.push_back({"grad", "stop_gradient", same && leak == 0.0,
                         format("forward identical %g, max input gradient %.3g", same, leak)});
  }

  for (BatchNormMode mode : {BatchNormMode::kTrain, BatchNormMode::kEval}) {
    Parameter x{"x", random_tensor({5, 3}, rng), Tensor({5, 3})};
    Parameter gamma{"gamma", random_tensor({3}, rng, 0.5, 1.5), Tensor({3})};
    Parameter beta{"beta", random_tensor({3}, rng), Tensor({3})};
    Parameter mean{"mean", random_tensor({3}, rng), Tensor({3}), false};
    Parameter var{"var", random_tensor({3}, rng, 0.5, 2.0), Tensor({3}), false};
    Graph g;
    NodeId bn = g.batch_norm(g.parameter(x), gamma, beta, mean, var, mode);
    g.forward({});
    NodeId loss = g.sum(g.mul(g.tanh(bn), g.constant(random_tensor({5, 3}, rng))));
    Parameter* params[] = {&x, &gamma, &beta};
    const double err = grad_check_graph(g, loss, {}, params, kStep);
    r.entries.push_back({"grad", mode == BatchNormMode::kTrain ? "batch_norm-train" : "batch_norm-eval",
                         err < kTol, format("max relative error %.3g", err)});
  }

  // Full loss, -objective + kl_beta * log Z, on a 2+2 model with a hidden layer.
  ModelConfig mc = ModelConfig::from_structure("~", 4);
  mc.n1 = mc.n2 = 2;
  mc.hidden_units = 3;
  GumboltModel model(mc, seed);
  model.set_rbm(Rbm::random(2, 2, 1.0, 1.0, rng));
  Tensor x({3, 4});
  for (auto& v : x.values()) v = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
  const std::size_t k = 3;
  const double kl_beta = 0.7, tau = 0.5;
  const NoiseBatch noise = draw_noise(mc, seed, 0, x.rows(), k);
  Objective objective(model, k, tau, BatchNormMode::kTrain);

  std::vector<Parameter*> trainable;
  std::vector<double> point;
  for (auto& p : model.params())
    if (p->trainable) {
      trainable.push_back(p.get());
      point.insert(point.end(), p->value.values().begin(), p->value.values().end());
    }
  const DifferentiableFn total = [&](std::span<const double> theta, std::span<double> grad) {
    std::size_t o = 0;
    for (Parameter* p : trainable)
      for (auto& v : p->value.values()) v = theta[o++];
    model.params().zero_grad();
    const auto value = objective.evaluate(x, noise, kl_beta, !grad.empty());
    const Rbm rbm = model.rbm();
    if (!grad.empty()) {
      const NegativePhase neg = exact_negative_phase(rbm);
      for (std::size_t i = 0; i < neg.grad_a.size(); ++i) model.rbm_a().grad[i] += kl_beta * neg.grad_a[i];
      for (std::size_t i = 0; i < neg.grad_b.size(); ++i) model.rbm_b().grad[i] += kl_beta * neg.grad_b[i];
      for (std::size_t i = 0; i < neg.grad_W.size(); ++i) model.rbm_w().grad[i] += kl_beta * neg.grad_W[i];
      o = 0;
      for (Parameter* p : trainable)
        for (double g : p->grad.values()) grad[o++] = g;
    }
    return value.loss + kl_beta * exact_log_partition(rbm);
  };
  const double err = grad_check(total, point, kStep);
  r.entries.push_back({"grad", "full-loss-2+2", err < kTol, format("max relative error %.3g", err)});
  return r;
}

VerifyReport verify_log_z(std::uint64_t seed) {
  VerifyReport r;
  Rng rng(seed);
  const LogZPreset preset = desk_preset();
  for (int i = 0; i < 10; ++i) {
    const Rbm rbm = Rbm::random(8, 8, 0.5, 0.5, rng);
    const double exact = exact_log_partition(rbm);
    TemperingOptions options;
    options.seed = seed * 100 + i;
    const TemperingLadder ladder = pilot_tune_ladder(rbm, 0.5, 64, options);
    const LogZEstimate est =
        estimate_log_z(rbm, ladder, preset.burn_in, preset.sweeps, preset.runs, options);
    const auto [lo, hi] = std::minmax_element(ladder.exchange_rates.begin(), ladder.exchange_rates.end());
    const double err = est.mean - exact;
    const bool ok = std::abs(err) <= 0.03 && est.std <= preset.std_threshold && *lo >= 0.35 &&
                    *hi <= 0.65;
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "error %+.4f, std %.4f, %zu rungs, exchange rates in [%.3f, %.3f]", err,
                  est.std, ladder.size(), *lo, *hi);
    r.entries.push_back({"logz", "rbm-8+8-" + std::to_string(i), ok, buf});
  }
  return r;
}

VerifyReport verify(const std::string& scope, std::uint64_t seed) {
  if (scope != "all" && scope != "theorems" && scope != "grad" && scope != "logz")
    throw std::invalid_argument("verify: unknown scope '" + scope + "'");
  VerifyReport out;
  auto append = [&](VerifyReport r) {
    out.entries.insert(out.entries.end(), r.entries.begin(), r.entries.end());
  };
  if (scope == "all" || scope == "theorems") append(verify_theorems(seed));
  if (scope == "all" || scope == "grad") append(verify_gradients(seed));
  if (scope == "all" || scope == "logz") append(verify_log_z(seed));
  return out;
}

}  // namespace gumbolt
