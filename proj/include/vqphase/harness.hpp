#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vqphase/decoder.hpp"
#include "vqphase/training.hpp"

namespace vqphase::harness {

enum class ModelKind { VqCnni, Vqi, VqCnniFixed };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

/// One model variant inside an experiment. All arms share the experiment's
/// per-run seeds, so run i is directly comparable across arms.
struct ArmSpec {
  std::string label;  // directory-safe name; defaults to model[_activation]
  ModelKind model = ModelKind::VqCnni;
  decoder::Activation activation = decoder::Activation::Softsign;
  // VqCnniFixed trains only the decoder on a circuit taken from a finished
  // arm: either an earlier arm of this experiment (source_arm label) or an
  // arm directory of another experiment (source_dir path).
  std::string source_arm;
  std::string source_dir;
};

struct ExperimentConfig {
  std::string name = "experiment";
  int n_particles = 8;
  std::vector<int> hidden = {64, 64};
  int encoding_layers = 1;
  int decoding_layers = 1;
  training::TrainConfig train;
  training::GaussianPrior prior;
  int eval_grid = 512;       // final evaluation grid size
  long long eval_shots = 0;  // extra finite-shot evaluation mode (0 = off)
  int runs = 1;
  std::uint64_t base_seed = 1;
  int workers = 0;  // parallel runs per arm; 0 = hardware concurrency
  bool snapshot_detail = false;
  std::string out_dir = "results/experiment";
  std::vector<ArmSpec> arms = {ArmSpec{}};

  void validate() const;  // throws std::invalid_argument on config errors
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Apply "dotted.path=value" to a config JSON (value parsed as JSON when
/// possible, kept as a string otherwise). Throws on malformed specs.
void apply_override(nlohmann::json& config, const std::string& spec);

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

struct RunSummary {
  int run = 0;
  bool ok = false;
  std::string error;
  std::uint64_t seed = 0;
  double best_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  int final_epoch = 0;
  double qfi = 0.0;
  int qfi_max_epoch = 0;
  double swpe_final = 0.0;        // trace value at the last eval epoch
  double swpe_at_qfi_max = 0.0;   // trace value at the QFI-max epoch
  double median_swpe_exact = 0.0; // best model, exact probabilities
  double median_swpe_shots = 0.0; // best model, finite shots (NaN when off)
  double j_mean = 0.0;
  double j_var = 0.0;
  double j_positive_frac = 0.0;
};

struct ArmResult {
  ArmSpec spec;
  std::vector<RunSummary> runs;
  Eigen::MatrixXd exact_estimates;  // runs x grid, NaN rows on failure
  Eigen::MatrixXd shot_estimates;   // empty when eval_shots = 0
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ArmResult> arms;

  bool all_ok() const;
};

/// Train and evaluate every (arm, run) pair, writing one artifact
/// directory per run plus per-arm summary CSVs. Per-run failures are
/// recorded (status column, error.txt) without aborting sibling runs.
/// Progress lines go to stdout when verbose.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                bool verbose = false);

/// Plain-text summary of a finished (possibly partial) experiment
/// directory, built from the stored CSVs. Throws when the directory has
/// no config.json.
std::string report(const std::string& out_dir);

/// Shortest round-trip decimal form (to_chars); "nan"/"inf" for
/// non-finite values.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;  // -1 when absent
  double number(std::size_t row, int column) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace vqphase::harness
