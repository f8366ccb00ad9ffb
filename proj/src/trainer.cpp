#include "gumbolt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "gumbolt/numeric.hpp"
#include "kernel_impl.hpp"

namespace gumbolt {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  Rng rng(seq);
  return rng();
}

enum SeedStream : std::uint64_t { kChainStream = 1, kBatchStream = 2, kNoiseStream = 3,
                                  kValidStream = 4, kEvalStream = 5 };

struct ConfigParser {
  const std::string& key;
  const std::string& value;
  std::size_t line;

  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument("config line " + std::to_string(line) + ": " + key + ": " + why);
  }
  std::size_t count() const {
    if (value.empty() || value[0] == '-' || value[0] == '+') fail("expected a non-negative integer");
    try {
      std::size_t used = 0;
      const auto v = std::stoull(value, &used);
      if (used != value.size()) fail("trailing characters in '" + value + "'");
      return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      fail("expected a non-negative integer, got '" + value + "'");
    }
  }
  double real() const {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) fail("trailing characters in '" + value + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("expected a number, got '" + value + "'");
    }
  }
  bool boolean() const {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail("expected true or false, got '" + value + "'");
  }
  std::vector<double> reals() const {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
      const std::string t = trim(part);
      ConfigParser sub{key, t, line};
      out.push_back(sub.real());
    }
    return out;
  }
};

}  // namespace

// ---------------------------------------------------------------------------

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    ConfigParser p{key, value, line_no};
    if (key == "structure") c.structure = value;
    else if (key == "k") c.k = p.count();
    else if (key == "tau") c.tau = p.real();
    else if (key == "total_iters") c.total_iters = p.count();
    else if (key == "lr0") c.lr0 = p.real();
    else if (key == "lr_decay") c.lr_decay = p.real();
    else if (key == "lr_milestones") c.lr_milestones = p.reals();
    else if (key == "kl_anneal_fraction") c.kl_anneal_fraction = p.real();
    else if (key == "batch") c.batch = p.count();
    else if (key == "pcd_sweeps") c.pcd_sweeps = p.count();
    else if (key == "pcd_chains") c.pcd_chains = p.count();
    else if (key == "no_w") c.no_w = p.boolean();
    else if (key == "seed") c.seed = p.count();
    else if (key == "dataset") c.dataset = value;
    else if (key == "toy_size") c.toy_size = p.count();
    else if (key == "toy_seed") c.toy_seed = p.count();
    else if (key == "n1") c.n1 = p.count();
    else if (key == "n2") c.n2 = p.count();
    else if (key == "hidden_units") c.hidden_units = p.count();
    else if (key == "eval_k") c.eval_k = p.count();
    else if (key == "logz_preset") c.logz_preset = value;
    else if (key == "valid_every") c.valid_every = p.count();
    else if (key == "valid_k") c.valid_k = p.count();
    else if (key == "valid_size") c.valid_size = p.count();
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "data_dir") c.data_dir = value;
    else throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  std::string milestones;
  for (std::size_t i = 0; i < lr_milestones.size(); ++i)
    milestones += (i ? "," : "") + fmt(lr_milestones[i]);
  os << "structure = " << structure << "\n"
     << "k = " << k << "\n"
     << "tau = " << fmt(tau) << "\n"
     << "total_iters = " << total_iters << "\n"
     << "lr0 = " << fmt(lr0) << "\n"
     << "lr_decay = " << fmt(lr_decay) << "\n"
     << "lr_milestones = " << milestones << "\n"
     << "kl_anneal_fraction = " << fmt(kl_anneal_fraction) << "\n"
     << "batch = " << batch << "\n"
     << "pcd_sweeps = " << pcd_sweeps << "\n"
     << "pcd_chains = " << pcd_chains << "\n"
     << "no_w = " << (no_w ? "true" : "false") << "\n"
     << "seed = " << seed << "\n"
     << "dataset = " << dataset << "\n"
     << "toy_size = " << toy_size << "\n"
     << "toy_seed = " << toy_seed << "\n"
     << "n1 = " << n1 << "\n"
     << "n2 = " << n2 << "\n"
     << "hidden_units = " << hidden_units << "\n"
     << "eval_k = " << eval_k << "\n"
     << "logz_preset = " << logz_preset << "\n"
     << "valid_every = " << valid_every << "\n"
     << "valid_k = " << valid_k << "\n"
     << "valid_size = " << valid_size << "\n"
     << "output_dir = " << output_dir << "\n";
  if (!data_dir.empty()) os << "data_dir = " << data_dir << "\n";
  return os.str();
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("config: " + why); };
  canonical_structure(structure);
  if (k == 0) fail("k must be at least 1");
  if (!(tau >= 0.0 && tau < 1.0)) fail("tau must lie in [0, 1)");
  if (total_iters == 0) fail("total_iters must be positive");
  if (!(lr0 > 0.0)) fail("lr0 must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must lie in (0, 1]");
  for (double m : lr_milestones)
    if (!(m > 0.0 && m <= 1.0)) fail("lr_milestones must lie in (0, 1]");
  if (!(kl_anneal_fraction > 0.0 && kl_anneal_fraction <= 1.0))
    fail("kl_anneal_fraction must lie in (0, 1]");
  if (batch == 0 || pcd_sweeps == 0 || pcd_chains == 0) fail("batch, pcd_sweeps and pcd_chains must be positive");
  if (valid_every == 0 || valid_k == 0 || eval_k == 0) fail("valid_every, valid_k and eval_k must be positive");
  preset_by_name(logz_preset);
  if (dataset.empty()) fail("dataset must be named");
}

ModelConfig TrainConfig::model_config(std::size_t input_dim) const {
  ModelConfig mc = ModelConfig::from_structure(structure, input_dim);
  if (n1) mc.n1 = n1;
  if (n2) mc.n2 = n2;
  mc.hidden_units = hidden_units;
  mc.validate();
  return mc;
}

double lr_at(std::size_t iter, const TrainConfig& config) {
  double lr = config.lr0;
  const double total = static_cast<double>(config.total_iters);
  for (double m : config.lr_milestones)
    if (static_cast<double>(iter) >= m * total) lr *= config.lr_decay;
  return lr;
}

double kl_beta_at(std::size_t iter, const TrainConfig& config) {
  const double ramp = config.kl_anneal_fraction * static_cast<double>(config.total_iters);
  return std::min(1.0, static_cast<double>(iter) / ramp);
}

// ---------------------------------------------------------------------------

void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, double lr, std::size_t t, const AdamSettings& s) {
  if (grad.size() != value.size() || m.size() != value.size() || v.size() != value.size())
    throw std::invalid_argument("adam_update: size mismatch");
  if (t == 0) throw std::invalid_argument("adam_update: steps count from 1");
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
  }
}

std::optional<std::string> first_nonfinite_grad(const ParameterStore& params) {
  for (const auto& p : params)
    if (p->trainable && !p->grad.all_finite()) return p->name;
  return std::nullopt;
}

void adam_step(ParameterStore& params, AdamState& state, double lr,
               const std::set<std::string>& frozen) {
  if (auto bad = first_nonfinite_grad(params)) throw NonFiniteGradient(*bad);
  ++state.step;
  for (auto& p : params) {
    if (!p->trainable || frozen.count(p->name)) continue;
    if (!p->value.same_shape(p->grad))
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + p->name);
    auto it = state.moments.find(p->name);
    if (it == state.moments.end())
      it = state.moments
               .emplace(p->name, std::make_pair(Tensor(p->value.shape()), Tensor(p->value.shape())))
               .first;
    auto& [m, v] = it->second;
    adam_update(p->value.values(), p->grad.values(), m.values(), v.values(), lr, state.step,
                state.settings);
  }
}

// ---------------------------------------------------------------------------

std::string metrics_header() { return "iter,lr,kl_beta,train_F,valid_L,valid_F,logz"; }

std::string metrics_line(const MetricsRow& r) {
  return std::to_string(r.iter) + "," + fmt(r.lr) + "," + fmt(r.kl_beta) + "," + fmt(r.train_f) +
         "," + fmt(r.valid_l) + "," + fmt(r.valid_f) + "," +
         (r.log_z ? fmt(*r.log_z) : std::string());
}

namespace {

TrainConfig checked(TrainConfig c) {
  c.validate();
  return c;
}

Tensor validation_rows(const Dataset& data, std::size_t limit) {
  const std::size_t n = limit ? std::min(limit, data.valid.rows()) : data.valid.rows();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return gather_rows(data.valid, idx);
}

}  // namespace

Trainer::Trainer(TrainConfig config, Dataset data)
    : config_(checked(std::move(config))),
      data_(std::move(data)),
      model_(config_.model_config(data_.dim()), config_.seed),
      train_objective_(model_, config_.k, config_.tau, BatchNormMode::kTrain),
      valid_objective_(model_, config_.valid_k, config_.tau, BatchNormMode::kEval),
      chains_(config_.pcd_chains, model_.config().n1, model_.config().n2,
              derive_seed(config_.seed, kChainStream)),
      batches_(data_.train.rows(), config_.batch, derive_seed(config_.seed, kBatchStream)) {
  if (data_.train.cols() != data_.dim() || data_.valid.rows() == 0)
    throw std::invalid_argument("trainer: dataset needs a training and a validation split");
}

Trainer::Trainer(const CheckpointFile& ck, Dataset data)
    : Trainer(TrainConfig::parse(ck.blob("config")), std::move(data)) {
  if (ck.blob("data/checksum") != data_.checksum)
    throw CheckpointError("checkpoint was trained on data with checksum " +
                          ck.blob("data/checksum") + ", got " + data_.checksum);
  for (auto& p : model_.params()) {
    const Tensor& t = ck.tensor("param/" + p->name);
    if (!t.same_shape(p->value))
      throw CheckpointError("parameter " + p->name + " has shape " + t.shape_string() +
                            ", model expects " + p->value.shape_string());
    p->value = t;
    if (ck.tensors.count("adam/m/" + p->name))
      adam_.moments.emplace(p->name, std::make_pair(ck.tensor("adam/m/" + p->name),
                                                    ck.tensor("adam/v/" + p->name)));
  }
  const Tensor& s = ck.tensor("state");
  if (s.size() != 6) throw CheckpointError("state entry has wrong size");
  iter_ = static_cast<std::size_t>(s[0]);
  adam_.step = static_cast<std::size_t>(s[1]);
  batches_.restore(static_cast<std::size_t>(s[2]), static_cast<std::size_t>(s[3]));
  f_sum_ = s[4];
  f_count_ = static_cast<std::size_t>(s[5]);
  chains_.z1 = ck.tensor("pcd/z1");
  chains_.z2 = ck.tensor("pcd/z2");
  if (chains_.z1.rows() != config_.pcd_chains || chains_.z2.rows() != config_.pcd_chains)
    throw CheckpointError("chain state does not match pcd_chains");
  std::istringstream rs(ck.blob("pcd/rng"));
  for (auto& r : chains_.rngs)
    if (!(rs >> r)) throw CheckpointError("cannot restore chain random state");
}

std::set<std::string> Trainer::frozen() const {
  if (config_.no_w) return {"rbm.W"};
  return {};
}

std::optional<double> Trainer::tracked_log_z() const {
  if (std::min(model_.config().n1, model_.config().n2) > kTrackedLogZUnits) return std::nullopt;
  return exact_log_partition(model_.rbm());
}

void Trainer::diverge(const std::string& why, const std::vector<Tensor>& buffers,
                      std::size_t epoch, std::size_t position) {
  std::size_t b = 0;
  for (auto& p : model_.params())
    if (!p->trainable) p->value = buffers[b++];
  batches_.restore(epoch, position);
  fs::create_directories(config_.output_dir);
  const fs::path path = fs::path(config_.output_dir) / "last_good.gbk";
  save(path);
  throw TrainingDiverged("training diverged at iteration " + std::to_string(iter_) + ": " + why +
                             "; last good state written to " + path.string(),
                         iter_, path);
}

void Trainer::step() {
  if (iter_ >= config_.total_iters) throw std::logic_error("trainer: already at total_iters");
  const std::size_t epoch = batches_.epoch(), position = batches_.position();
  std::vector<Tensor> buffers;
  for (const auto& p : model_.params())
    if (!p->trainable) buffers.push_back(p->value);

  const Tensor x = gather_rows(data_.train, batches_.next());
  const double kb = kl_beta_at(iter_, config_);
  const double lr = lr_at(iter_, config_);
  const auto log_z = tracked_log_z();
  model_.params().zero_grad();

  ObjectiveValue value;
  try {
    const NoiseBatch noise = draw_noise(model_.config(), derive_seed(config_.seed, kNoiseStream, iter_),
                                        0, x.rows(), config_.k);
    value = train_objective_.evaluate(x, noise, kb, true);
  } catch (const GraphError& e) {
    diverge(e.what(), buffers, epoch, position);
  } catch (const std::domain_error& e) {
    diverge(e.what(), buffers, epoch, position);
  }
  if (!std::isfinite(value.loss)) diverge("non-finite loss", buffers, epoch, position);
  if (auto bad = first_nonfinite_grad(model_.params()))
    diverge("non-finite gradient for parameter '" + *bad + "'", buffers, epoch, position);

  // The -log Z term of the bound contributes +kl_beta * E_p[z] terms.
  const NegativePhase neg = pcd_negative_phase(model_.rbm(), chains_, config_.pcd_sweeps);
  auto add = [kb](Tensor& grad, const Tensor& moment) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += kb * moment[i];
  };
  add(model_.rbm_a().grad, neg.grad_a);
  add(model_.rbm_b().grad, neg.grad_b);
  add(model_.rbm_w().grad, neg.grad_W);
  if (config_.no_w) model_.rbm_w().grad.fill(0.0);

  adam_step(model_.params(), adam_, lr, frozen());
  f_sum_ += value.objective - kb * log_z.value_or(0.0);
  ++f_count_;
  ++iter_;
}

MetricsRow Trainer::measure() {
  MetricsRow row;
  row.iter = iter_;
  const std::size_t at = std::min(iter_, config_.total_iters - 1);
  row.lr = lr_at(at, config_);
  row.kl_beta = kl_beta_at(at, config_);
  row.train_f = f_count_ ? f_sum_ / static_cast<double>(f_count_)
                         : std::numeric_limits<double>::quiet_NaN();
  row.log_z = tracked_log_z();
  const double lz = row.log_z.value_or(0.0);

  const Tensor xv = validation_rows(data_, config_.valid_size);
  const std::uint64_t vseed = derive_seed(config_.seed, kValidStream);
  constexpr std::size_t kChunk = 100;
  double f_sum = 0.0;
  for (std::size_t off = 0; off < xv.rows(); off += kChunk) {
    const std::size_t m = std::min(kChunk, xv.rows() - off);
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = off + i;
    const NoiseBatch noise = draw_noise(model_.config(), vseed, off, m, config_.valid_k);
    const ObjectiveValue v = valid_objective_.evaluate(gather_rows(xv, idx), noise, 1.0, false);
    for (std::size_t i = 0; i < m; ++i) f_sum += v.per_datapoint[i];
  }
  row.valid_f = f_sum / static_cast<double>(xv.rows()) - lz;
  const auto bounds = discrete_iw_bound(model_, xv, config_.valid_k, lz, vseed);
  double l_sum = 0.0;
  for (double b : bounds) l_sum += b;
  row.valid_l = l_sum / static_cast<double>(bounds.size());
  return row;
}

void Trainer::run(std::size_t until, const std::function<void(const MetricsRow&)>& on_row) {
  until = std::min(until, config_.total_iters);
  auto emit = [&] {
    const MetricsRow row = measure();
    f_sum_ = 0.0;
    f_count_ = 0;
    if (on_row) on_row(row);
  };
  if (iter_ == 0 && f_count_ == 0) emit();
  while (iter_ < until) {
    step();
    if (iter_ % config_.valid_every == 0 || iter_ == config_.total_iters) emit();
  }
}

CheckpointFile Trainer::checkpoint() const {
  CheckpointFile f;
  f.blobs["config"] = config_.to_text();
  f.blobs["data/name"] = data_.name;
  f.blobs["data/checksum"] = data_.checksum;
  f.tensors["data/shape"] = Tensor({2}, {static_cast<double>(data_.image_rows),
                                         static_cast<double>(data_.image_cols)});
  for (const auto& p : model_.params()) f.tensors["param/" + p->name] = p->value;
  for (const auto& [name, mv] : adam_.moments) {
    f.tensors["adam/m/" + name] = mv.first;
    f.tensors["adam/v/" + name] = mv.second;
  }
  f.tensors["state"] = Tensor({6}, {static_cast<double>(iter_), static_cast<double>(adam_.step),
                                    static_cast<double>(batches_.epoch()),
                                    static_cast<double>(batches_.position()), f_sum_,
                                    static_cast<double>(f_count_)});
  f.tensors["pcd/z1"] = chains_.z1;
  f.tensors["pcd/z2"] = chains_.z2;
  std::ostringstream rs;
  for (const auto& r : chains_.rngs) rs << r << "\n";
  f.blobs["pcd/rng"] = rs.str();
  return f;
}

// ---------------------------------------------------------------------------

namespace {

// Drops metric rows past `iter` so a resumed run appends without duplicates.
void truncate_metrics(const fs::path& path, std::size_t iter) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (keep.empty() || line.empty()) {
      if (!line.empty()) keep.push_back(line);
      continue;
    }
    if (std::stoull(line.substr(0, line.find(','))) <= iter) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

}  // namespace

void train(const TrainConfig& config, const fs::path& data_dir,
           const std::optional<fs::path>& resume, std::ostream* log) {
  std::optional<CheckpointFile> ck;
  TrainConfig effective = config;
  if (resume) {
    ck = CheckpointFile::load(*resume);
    effective = TrainConfig::parse(ck->blob("config"));
  }
  Dataset data = load_dataset(effective.dataset, data_dir, effective.toy_seed, effective.toy_size);
  Trainer trainer = ck ? Trainer(*ck, std::move(data)) : Trainer(effective, std::move(data));

  const fs::path out_dir = effective.output_dir;
  fs::create_directories(out_dir);
  const fs::path metrics_path = out_dir / "metrics.csv", timing_path = out_dir / "timing.csv";
  if (ck) {
    truncate_metrics(metrics_path, trainer.iteration());
    truncate_metrics(timing_path, trainer.iteration());
  } else {
    std::ofstream(metrics_path, std::ios::trunc) << metrics_header() << "\n";
    std::ofstream(timing_path, std::ios::trunc) << "iter,wall_time_s\n";
  }
  std::ofstream metrics(metrics_path, std::ios::app), timing(timing_path, std::ios::app);
  const auto start = std::chrono::steady_clock::now();
  if (log && !data.canonical) *log << "note: dataset " << trainer.data().name << " is not the canonical binarisation\n";

  trainer.run(effective.total_iters, [&](const MetricsRow& row) {
    metrics << metrics_line(row) << "\n" << std::flush;
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timing << row.iter << "," << fmt(wall) << "\n" << std::flush;
    trainer.save(out_dir / "checkpoint.gbk");
    if (log)
      *log << "iter " << row.iter << "  train_F " << fmt(row.train_f) << "  valid_L "
           << fmt(row.valid_l) << "  valid_F " << fmt(row.valid_f) << "\n";
  });
  trainer.save(out_dir / "final.gbk");
}

// ---------------------------------------------------------------------------

LoadedModel load_model(const CheckpointFile& ck) {
  LoadedModel lm;
  lm.config = TrainConfig::parse(ck.blob("config"));
  const Tensor& shape = ck.tensor("data/shape");
  lm.image_rows = static_cast<std::size_t>(shape[0]);
  lm.image_cols = static_cast<std::size_t>(shape[1]);
  lm.model = std::make_unique<GumboltModel>(lm.config.model_config(lm.image_rows * lm.image_cols),
                                            lm.config.seed);
  for (auto& p : lm.model->params()) {
    const Tensor& t = ck.tensor("param/" + p->name);
    if (!t.same_shape(p->value))
      throw CheckpointError("parameter " + p->name + " has shape " + t.shape_string());
    p->value = t;
  }
  return lm;
}

LogZReport model_log_z(const Rbm& rbm, const LogZPreset& preset, std::uint64_t seed,
                       bool allow_exact) {
  LogZReport r;
  if (allow_exact && std::min(rbm.n1(), rbm.n2()) <= 20) {
    r.mean = exact_log_partition(rbm);
    r.runs = {r.mean};
    r.method = "exact";
    return r;
  }
  TemperingOptions options;
  options.seed = seed;
  const TemperingLadder ladder = pilot_tune_ladder(rbm, 0.5, 400, options);
  const LogZEstimate est =
      estimate_log_z(rbm, ladder, preset.burn_in, preset.sweeps, preset.runs, options);
  r.mean = est.mean;
  r.std = est.std;
  r.runs = est.runs;
  r.method = preset.name;
  r.betas = ladder.betas;
  r.above_threshold = est.std > preset.std_threshold;
  return r;
}

EvalResult evaluate(const CheckpointFile& ck, const Tensor& test, std::size_t k,
                    const LogZPreset& preset, std::uint64_t seed, bool allow_exact) {
  if (k == 0) throw std::invalid_argument("evaluate: k must be at least 1");
  if (test.rows() == 0) throw std::invalid_argument("evaluate: empty test set");
  LoadedModel lm = load_model(ck);
  if (test.cols() != lm.model->config().input_dim)
    throw std::invalid_argument("evaluate: test images have " + std::to_string(test.cols()) +
                                " pixels, model expects " +
                                std::to_string(lm.model->config().input_dim));
  EvalResult r;
  r.dataset = ck.blob("data/name");
  r.structure = lm.config.structure;
  r.train_k = lm.config.k;
  r.eval_k = k;
  r.log_z = model_log_z(lm.model->rbm(), preset, seed, allow_exact);
  if (r.log_z.above_threshold) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "log Z std %.4g exceeds the %s threshold %.4g", r.log_z.std,
                  preset.name.c_str(), preset.std_threshold);
    r.warnings.push_back(buf);
  }
  const auto bounds =
      discrete_iw_bound(*lm.model, test, k, r.log_z.mean, derive_seed(seed, kEvalStream));
  const auto positive = std::count_if(bounds.begin(), bounds.end(), [](double b) { return b > 0.0; });
  if (positive)
    r.warnings.push_back(std::to_string(positive) +
                         " test images have a bound above 0, so log Z is likely underestimated");
  const double n = static_cast<double>(bounds.size());
  double sum = 0.0, sq = 0.0;
  for (double b : bounds) sum += -b;
  r.nll_mean = sum / n;
  for (double b : bounds) sq += (-b - r.nll_mean) * (-b - r.nll_mean);
  r.nll_se = bounds.size() > 1 ? std::sqrt(sq / (n - 1.0) / n) : 0.0;
  return r;
}

std::string eval_header() {
  return "dataset,structure,train_k,eval_k,test_nll,test_nll_se,logz,logz_std,logz_method,warnings";
}

std::string eval_line(const EvalResult& r) {
  std::string warn;
  for (const auto& w : r.warnings) warn += (warn.empty() ? "" : "; ") + w;
  return r.dataset + "," + r.structure + "," + std::to_string(r.train_k) + "," +
         std::to_string(r.eval_k) + "," + fmt(r.nll_mean) + "," + fmt(r.nll_se) + "," +
         fmt(r.log_z.mean) + "," + fmt(r.log_z.std) + "," + r.log_z.method + ",\"" + warn + "\"";
}

Tensor sample_means(const GumboltModel& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) return Tensor({0, model.config().input_dim});
  const Rbm rbm = model.rbm();
  PcdChains chains(n, rbm.n1(), rbm.n2(), seed);
  for (std::size_t s = 0; s < kSampleBurnIn; ++s) gibbs_sweep(rbm, chains);
  return decode_means(model, chains.z1, chains.z2);
}

std::vector<fs::path> write_pgm(const Tensor& means, std::size_t rows, std::size_t cols,
                                const fs::path& dir) {
  std::vector<fs::path> paths;
  if (means.rows() == 0) return paths;
  if (means.cols() != rows * cols) throw std::invalid_argument("write_pgm: image size mismatch");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < means.rows(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04zu.pgm", i);
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << "P5\n" << cols << " " << rows << "\n255\n";
    for (double v : means.row(i))
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    paths.push_back(p);
  }
  return paths;
}

}  // namespace gumbolt
