// Command-line front end: train, eval, logz, verify, sample.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gumbolt/data.hpp"
#include "gumbolt/trainer.hpp"
#include "gumbolt/verify.hpp"

namespace {

using namespace gumbolt;

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Appends to `path`, writing the header first when the file is new or empty.
void append_csv(const std::string& path, const std::string& header, const std::string& line) {
  if (path.empty()) {
    std::cout << header << "\n" << line << "\n";
    return;
  }
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (fresh) out << header << "\n";
  out << line << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational autoencoders with RBM priors trained by a relaxed objective"};
  app.require_subcommand(1);

  std::optional<std::string> data_dir;
  std::string config_path, resume_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a key=value config file");
  train_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", resume_path, "Resume from this checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--data-dir", data_dir, "Dataset directory (default $GUMBOLT_DATA_DIR)");

  std::string ckpt_path, preset = "desk", out_path;
  std::size_t eval_k = 4000;
  std::uint64_t seed = 1;
  bool force_tempering = false;
  auto* eval_cmd = app.add_subcommand("eval", "Test-set negative log-likelihood bound");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--k", eval_k, "Importance samples")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--logz", preset, "log Z preset")->check(CLI::IsMember({"desk", "paper"}));
  eval_cmd->add_option("--data-dir", data_dir, "Dataset directory (default $GUMBOLT_DATA_DIR)");
  eval_cmd->add_option("--out", out_path, "Append the result row to this CSV");
  eval_cmd->add_option("--seed", seed, "Random seed");
  eval_cmd->add_flag("--tempering", force_tempering, "Estimate log Z even when it can be enumerated");

  auto* logz_cmd = app.add_subcommand("logz", "Estimate log Z of a checkpoint's prior");
  logz_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  logz_cmd->add_option("--preset", preset, "Preset")->check(CLI::IsMember({"desk", "paper"}));
  logz_cmd->add_option("--out", out_path, "CSV output (default stdout)");
  logz_cmd->add_option("--seed", seed, "Random seed");

  std::string scope = "all";
  auto* verify_cmd = app.add_subcommand("verify", "Run the property and gradient suites");
  verify_cmd->add_option("--scope", scope, "Suite")->check(CLI::IsMember({"all", "theorems", "grad", "logz"}));
  verify_cmd->add_option("--out", out_path, "Also write the report to this file");
  verify_cmd->add_option("--seed", seed, "Random seed");

  std::size_t n_samples = 0;
  std::string sample_dir;
  auto* sample_cmd = app.add_subcommand("sample", "Decode RBM samples to PGM images");
  sample_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--n", n_samples, "Number of images")->required();
  sample_cmd->add_option("--out", sample_dir, "Output directory")->required();
  sample_cmd->add_option("--seed", seed, "Random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      if (config_path.empty() && resume_path.empty())
        throw std::invalid_argument("train needs --config or --resume");
      const TrainConfig config = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
      std::optional<std::filesystem::path> resume;
      if (!resume_path.empty()) resume = resume_path;
      const auto dir = resolve_data_dir(data_dir ? data_dir : (config.data_dir.empty()
                                                                  ? std::nullopt
                                                                  : std::optional(config.data_dir)));
      train(config, dir, resume, &std::cout);
    } else if (*eval_cmd) {
      const CheckpointFile ck = CheckpointFile::load(ckpt_path);
      const TrainConfig config = TrainConfig::parse(ck.blob("config"));
      const Dataset data = load_dataset(config.dataset, resolve_data_dir(data_dir), config.toy_seed,
                                        config.toy_size);
      if (!data.canonical) std::cerr << "note: " << data.name << " is not the canonical binarisation\n";
      const EvalResult r = evaluate(ck, data.test, eval_k, preset_by_name(preset), seed, !force_tempering);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      append_csv(out_path, eval_header(), eval_line(r));
    } else if (*logz_cmd) {
      const LoadedModel lm = load_model(CheckpointFile::load(ckpt_path));
      const LogZPreset p = preset_by_name(preset);
      const LogZReport r = model_log_z(lm.model->rbm(), p, seed, false);
      std::ofstream file;
      if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
      }
      std::ostream& out = out_path.empty() ? std::cout : file;
      out << "entry,log_z\n";
      for (std::size_t i = 0; i < r.runs.size(); ++i) out << "run" << i << "," << csv_number(r.runs[i]) << "\n";
      out << "mean," << csv_number(r.mean) << "\nstd," << csv_number(r.std) << "\n";
      if (r.above_threshold)
        std::cerr << "warning: log Z std " << r.std << " exceeds the " << p.name << " threshold "
                  << p.std_threshold << "\n";
    } else if (*verify_cmd) {
      const VerifyReport report = verify(scope, seed);
      std::cout << report.text();
      if (!out_path.empty()) std::ofstream(out_path) << report.text();
      return report.passed() ? 0 : 1;
    } else if (*sample_cmd) {
      const LoadedModel lm = load_model(CheckpointFile::load(ckpt_path));
      const Tensor means = sample_means(*lm.model, n_samples, seed);
      const auto paths = write_pgm(means, lm.image_rows, lm.image_cols, sample_dir);
      std::cout << "wrote " << paths.size() << " images to " << sample_dir << "\n";
    }
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
