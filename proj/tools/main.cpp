#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vqphase/harness.hpp"

namespace harness = vqphase::harness;
using nlohmann::json;

namespace {

int execute(json config_json, const std::vector<std::string>& overrides,
            const std::string& out, int runs, long long seed, int workers) {
  for (const std::string& spec : overrides)
    harness::apply_override(config_json, spec);
  if (!out.empty()) config_json["out_dir"] = out;
  if (runs > 0) config_json["runs"] = runs;
  if (seed >= 0) config_json["base_seed"] = seed;
  if (workers >= 0) config_json["workers"] = workers;
  const harness::ExperimentConfig config =
      harness::config_from_json(config_json);
  const harness::ExperimentResult result =
      harness::run_experiment(config, /*verbose=*/true);
  std::cout << "\n" << harness::report(config.out_dir);
  return result.all_ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational interferometer phase estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path, preset_name, report_dir, out;
  std::vector<std::string> overrides;
  int runs = -1, workers = -1;
  long long seed = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--set", overrides,
                    "override any config key by dotted path, e.g. "
                    "train.max_iters=500 or arms.0.activation=tanh");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--runs", runs, "runs per arm");
    cmd->add_option("--seed", seed, "base seed");
    cmd->add_option("--workers", workers,
                    "parallel runs per arm (0 = hardware threads)");
  };

  CLI::App* cmd_run =
      app.add_subcommand("run", "execute an experiment from a JSON config");
  cmd_run->add_option("config", config_path, "config file")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(cmd_run);

  CLI::App* cmd_preset =
      app.add_subcommand("preset", "execute a built-in experiment");
  cmd_preset->add_option("name", preset_name, "preset name, or 'list'")
      ->required();
  add_common(cmd_preset);

  CLI::App* cmd_report =
      app.add_subcommand("report", "summarize a finished experiment directory");
  cmd_report->add_option("dir", report_dir, "experiment output directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      std::ifstream in(config_path);
      return execute(json::parse(in), overrides, out, runs, seed, workers);
    }
    if (cmd_preset->parsed()) {
      if (preset_name == "list") {
        for (const std::string& name : harness::preset_names())
          std::cout << name << "\n";
        return 0;
      }
      return execute(harness::to_json(harness::preset(preset_name)), overrides,
                     out, runs, seed, workers);
    }
    std::cout << harness::report(report_dir);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
