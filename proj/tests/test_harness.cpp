#include <doctest.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "vqphase/harness.hpp"

using namespace vqphase;
using namespace vqphase::harness;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig config;
  config.name = "tiny";
  config.n_particles = 2;
  config.hidden = {8, 8};
  config.train.n_phi = 16;
  config.train.max_iters = 40;
  config.train.min_iters = 10;
  config.train.patience = 100;
  config.train.eval_interval = 10;
  config.train.eval_grid_size = 32;
  config.eval_grid = 32;
  config.eval_shots = 500;
  config.runs = 2;
  config.base_seed = 11;
  config.workers = 1;
  config.out_dir = out_dir;
  config.arms = {
      ArmSpec{"vqi", ModelKind::Vqi, decoder::Activation::Softsign, "", ""},
      ArmSpec{"vqcnni_softsign", ModelKind::VqCnni,
              decoder::Activation::Softsign, "", ""},
      ArmSpec{"vqcnni_fixed", ModelKind::VqCnniFixed,
              decoder::Activation::Softsign, "vqi", ""}};
  return config;
}

fs::path scratch_root() {
  const fs::path root = fs::path("test_artifacts") / "harness";
  return root;
}

}  // namespace

TEST_CASE("model kind names round trip") {
  for (ModelKind kind :
       {ModelKind::VqCnni, ModelKind::Vqi, ModelKind::VqCnniFixed})
    CHECK(model_kind_from_name(model_kind_name(kind)) == kind);
  CHECK_THROWS_AS(model_kind_from_name("mlp"), std::invalid_argument);
}

TEST_CASE("format_double round trips exactly") {
  const double values[] = {0.1,
                           -0.0,
                           1.0 / 3.0,
                           3.141592653589793,
                           1e-300,
                           -2.5e300,
                           6.02214076e23,
                           -160.0,
                           std::numeric_limits<double>::denorm_min()};
  for (double v : values) {
    const std::string text = format_double(v);
    double back = 0.0;
    const auto res =
        std::from_chars(text.data(), text.data() + text.size(), back);
    CHECK(res.ec == std::errc());
    CHECK(std::memcmp(&back, &v, sizeof(double)) == 0);
  }
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("csv writer/reader round trip") {
  const fs::path dir = scratch_root() / "csv";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "t.csv", std::ios::binary);
    out << "a,b,mode\n0.1,nan,exact\n-3,0.30000000000000004,shots\n";
  }
  const CsvTable table = read_csv((dir / "t.csv").string());
  REQUIRE(table.header.size() == 3);
  CHECK(table.col("b") == 1);
  CHECK(table.col("missing") == -1);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.number(0, 0) == 0.1);
  CHECK(std::isnan(table.number(0, 1)));
  CHECK(table.number(1, 1) == 0.30000000000000004);
  CHECK(table.rows[1][2] == "shots");
  CHECK_THROWS_AS(table.number(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(table.number(5, 0), std::out_of_range);
}

TEST_CASE("config json round trips through serialization") {
  for (const std::string& name : preset_names()) {
    const ExperimentConfig config = preset(name);
    const json j = to_json(config);
    const ExperimentConfig back = config_from_json(j);
    CHECK(to_json(back).dump(2) == j.dump(2));
  }
}

TEST_CASE("config validation rejects malformed setups") {
  ExperimentConfig config = tiny_config("x");
  config.arms[2].source_arm.clear();
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);  // no source

  config = tiny_config("x");
  config.arms[2].source_dir = "somewhere";
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);  // both sources

  config = tiny_config("x");
  config.arms[2].source_arm = "vqcnni_fixed";  // itself, not earlier
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  config = tiny_config("x");
  config.arms[1].label = "vqi";  // duplicate
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  config = tiny_config("x");
  config.arms[0].label = "Bad Label";
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  config = tiny_config("x");
  config.arms[0].source_dir = "stray";  // source on a non-fixed arm
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  config = tiny_config("x");
  config.runs = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  json j = to_json(tiny_config("x"));
  j["typo_key"] = 1;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

  j = to_json(tiny_config("x"));
  j["train"]["typo"] = 1;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
}

TEST_CASE("overrides reach nested keys") {
  json j = to_json(tiny_config("x"));
  apply_override(j, "train.max_iters=500");
  apply_override(j, "arms.1.activation=tanh");
  apply_override(j, "out_dir=elsewhere");
  apply_override(j, "base_seed=99");
  const ExperimentConfig config = config_from_json(j);
  CHECK(config.train.max_iters == 500);
  CHECK(config.arms[1].activation == decoder::Activation::Tanh);
  CHECK(config.out_dir == "elsewhere");
  CHECK(config.base_seed == 99);
  CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(j, "=5"), std::invalid_argument);
}

TEST_CASE("presets encode the study designs") {
  CHECK(preset_names().size() == 4);
  CHECK_THROWS_AS(preset("fig9"), std::invalid_argument);

  const ExperimentConfig fig2 = preset("fig2_global");
  CHECK(fig2.runs == 20);
  CHECK(fig2.eval_shots == 1000000);
  CHECK(fig2.n_particles == 8);
  REQUIRE(fig2.arms.size() == 2);
  CHECK(fig2.arms[0].model == ModelKind::VqCnni);
  CHECK(fig2.arms[0].activation == decoder::Activation::Softsign);
  CHECK(fig2.arms[1].model == ModelKind::Vqi);

  const ExperimentConfig fig3 = preset("fig3_representation");
  CHECK(fig3.eval_shots == 0);
  REQUIRE(fig3.arms.size() == 3);
  CHECK(fig3.arms[2].model == ModelKind::VqCnniFixed);
  CHECK(fig3.arms[2].source_arm == "vqi");

  const ExperimentConfig fig4 = preset("fig4_dynamics");
  CHECK(fig4.runs == 1);
  CHECK(fig4.snapshot_detail);

  const ExperimentConfig fig5 = preset("fig5_activations");
  CHECK(fig5.runs == 10);
  CHECK(fig5.train.max_iters == 4000);
  REQUIRE(fig5.arms.size() == 6);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(fig5.arms[i].activation == decoder::kStudyActivations[i]);
}

TEST_CASE("tiny experiment produces the declared artifact set") {
  const fs::path out = scratch_root() / "tiny_a";
  fs::remove_all(out);
  const ExperimentConfig config = tiny_config(out.string());
  const ExperimentResult result = run_experiment(config);
  CHECK(result.all_ok());
  REQUIRE(result.arms.size() == 3);
  for (const ArmResult& arm : result.arms) {
    REQUIRE(arm.runs.size() == 2);
    for (const RunSummary& s : arm.runs) {
      CHECK(s.ok);
      CHECK(std::isfinite(s.best_loss));
      CHECK(std::isfinite(s.median_swpe_exact));
      CHECK(std::isfinite(s.median_swpe_shots));
      CHECK(std::isfinite(s.j_mean));
      CHECK(s.qfi > 0.0);
      CHECK(s.final_epoch >= s.qfi_max_epoch);
    }
  }

  CHECK(fs::exists(out / "config.json"));
  for (const char* arm : {"vqi", "vqcnni_softsign", "vqcnni_fixed"}) {
    for (int run = 0; run < 2; ++run) {
      const fs::path rd =
          out / "arms" / arm / (std::string("run_00") + char('0' + run));
      for (const char* file : {"params.json", "trace.csv", "trajectory.csv",
                               "eval_phase.csv", "jacobian.csv"})
        CHECK(fs::exists(rd / file));
      CHECK(!fs::exists(rd / "error.txt"));
    }
    CHECK(fs::exists(out / "summary" /
                     (std::string("run_summary_") + arm + ".csv")));
    CHECK(fs::exists(out / "summary" /
                     (std::string("swpe_summary_") + arm + ".csv")));
  }
  CHECK(fs::exists(out / "summary" / "jacobian_summary.csv"));

  const CsvTable runs =
      read_csv((out / "summary" / "run_summary_vqcnni_softsign.csv").string());
  REQUIRE(runs.rows.size() == 2);
  CHECK(runs.rows[0][static_cast<std::size_t>(runs.col("status"))] == "ok");
  CHECK(runs.number(0, runs.col("j_positive_frac")) >= 0.0);
  CHECK(runs.number(1, runs.col("seed")) == 12.0);  // base_seed + run

  const CsvTable eval = read_csv(
      (out / "arms" / "vqi" / "run_000" / "eval_phase.csv").string());
  CHECK(eval.rows.size() == 2 * 32);  // exact + shots modes
  CHECK(eval.rows[0][5] == "exact");
  CHECK(eval.rows[32][5] == "shots");

  const CsvTable swpe =
      read_csv((out / "summary" / "swpe_summary_vqi.csv").string());
  CHECK(swpe.rows.size() == 2 * 32);

  const CsvTable jac =
      read_csv((out / "summary" / "jacobian_summary.csv").string());
  REQUIRE(jac.rows.size() == 3);
  CHECK(jac.rows[0][0] == "vqi");

  // the fixed arm trains on the circuit stored by the matching vqi run
  const json vqi_params = json::parse(
      slurp(out / "arms" / "vqi" / "run_001" / "params.json"));
  const json fixed_params = json::parse(
      slurp(out / "arms" / "vqcnni_fixed" / "run_001" / "params.json"));
  CHECK(fixed_params.at("circuit") == vqi_params.at("circuit"));
  CHECK(fixed_params.at("source_run").get<std::string>().find("vqi") !=
        std::string::npos);

  // trajectory rows exist at every eval interval plus the final epoch
  const CsvTable traj = read_csv(
      (out / "arms" / "vqcnni_softsign" / "run_000" / "trajectory.csv")
          .string());
  REQUIRE(!traj.rows.empty());
  CHECK(traj.number(0, 0) == 10.0);
  CHECK(traj.number(traj.rows.size() - 1, 0) == 40.0);

  const std::string text = report(out.string());
  CHECK(text.find("tiny") != std::string::npos);
  CHECK(text.find("vqcnni_softsign") != std::string::npos);
  CHECK(text.find("2/2") != std::string::npos);
  CHECK(text.find("no runs") == std::string::npos);
}

TEST_CASE("experiments are byte-deterministic, workers included") {
  const fs::path out_a = scratch_root() / "det_a";
  const fs::path out_b = scratch_root() / "det_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);

  ExperimentConfig config = tiny_config(out_a.string());
  run_experiment(config);
  config.out_dir = out_b.string();
  config.workers = 2;  // pool scheduling must not affect artifacts
  run_experiment(config);

  for (const char* name :
       {"run_summary_vqi.csv", "run_summary_vqcnni_softsign.csv",
        "run_summary_vqcnni_fixed.csv", "swpe_summary_vqi.csv",
        "swpe_summary_vqcnni_softsign.csv", "swpe_summary_vqcnni_fixed.csv",
        "jacobian_summary.csv"})
    CHECK(slurp(out_a / "summary" / name) == slurp(out_b / "summary" / name));
  for (const char* arm : {"vqi", "vqcnni_softsign", "vqcnni_fixed"})
    for (const char* file :
         {"params.json", "trace.csv", "trajectory.csv", "eval_phase.csv",
          "jacobian.csv"})
      CHECK(slurp(out_a / "arms" / arm / "run_001" / file) ==
            slurp(out_b / "arms" / arm / "run_001" / file));

  // re-running into the same directory reproduces it unchanged
  const std::string before =
      slurp(out_a / "summary" / "run_summary_vqcnni_softsign.csv");
  ExperimentConfig again = tiny_config(out_a.string());
  run_experiment(again);
  CHECK(slurp(out_a / "summary" / "run_summary_vqcnni_softsign.csv") ==
        before);
}

TEST_CASE("snapshots land at eval epochs and round trip") {
  const fs::path out = scratch_root() / "snaps";
  fs::remove_all(out);
  ExperimentConfig config = tiny_config(out.string());
  config.runs = 1;
  config.snapshot_detail = true;
  config.arms = {ArmSpec{"vqcnni_softsign", ModelKind::VqCnni,
                         decoder::Activation::Softsign, "", ""}};
  run_experiment(config);

  const fs::path run_dir = out / "arms" / "vqcnni_softsign" / "run_000";
  const CsvTable traj = read_csv((run_dir / "trajectory.csv").string());
  REQUIRE(!traj.rows.empty());
  for (std::size_t r = 0; r < traj.rows.size(); ++r) {
    const int epoch = static_cast<int>(traj.number(r, 0));
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%06d", epoch);
    const fs::path snap = run_dir / "snapshots" / name;
    REQUIRE(fs::exists(snap / "meta.json"));
    REQUIRE(fs::exists(snap / "heatmap.csv"));
    REQUIRE(fs::exists(snap / "feature_projection.csv"));
    REQUIRE(fs::exists(snap / "latent_projection.csv"));

    // stored trace values reappear bit-exactly in the snapshot metadata
    const json meta = json::parse(slurp(snap / "meta.json"));
    CHECK(meta.at("epoch").get<int>() == epoch);
    CHECK(meta.at("qfi").get<double>() == traj.number(r, 1));
    CHECK(meta.at("swpe_median").get<double>() == traj.number(r, 2));

    const CsvTable heat = read_csv((snap / "heatmap.csv").string());
    CHECK(heat.rows.size() == 32 * 3);  // grid x (N+1) outcomes
    double row_sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) row_sum += heat.number(k, 2);
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));

    const CsvTable proj = read_csv((snap / "latent_projection.csv").string());
    CHECK(proj.rows.size() == 32);
    CHECK(proj.number(0, 2) == proj.number(0, 2));  // finite pc2 cell parses
  }
  const int snapshot_dirs = static_cast<int>(std::distance(
      fs::directory_iterator(run_dir / "snapshots"), fs::directory_iterator{}));
  CHECK(snapshot_dirs == static_cast<int>(traj.rows.size()));
}

TEST_CASE("failed source reference is recorded without killing siblings") {
  const fs::path out = scratch_root() / "missing_src";
  fs::remove_all(out);
  ExperimentConfig config = tiny_config(out.string());
  config.runs = 1;
  config.arms = {ArmSpec{"vqi", ModelKind::Vqi, decoder::Activation::Softsign,
                         "", ""},
                 ArmSpec{"vqcnni_fixed", ModelKind::VqCnniFixed,
                         decoder::Activation::Softsign, "",
                         (out / "arms" / "nonexistent").string()}};
  const ExperimentResult result = run_experiment(config);
  CHECK(!result.all_ok());
  CHECK(result.arms[0].runs[0].ok);
  CHECK(!result.arms[1].runs[0].ok);
  CHECK(fs::exists(out / "arms" / "vqcnni_fixed" / "run_000" / "error.txt"));

  const CsvTable runs =
      read_csv((out / "summary" / "run_summary_vqcnni_fixed.csv").string());
  CHECK(runs.rows[0][static_cast<std::size_t>(runs.col("status"))] ==
        "failed");
  CHECK(std::isnan(runs.number(0, runs.col("median_swpe_exact"))));

  const std::string text = report(out.string());
  CHECK(text.find("no runs") != std::string::npos);  // fixed arm: 0 ok runs
  CHECK(text.find("failed runs: 1") != std::string::npos);
}

TEST_CASE("report flags an empty artifact directory") {
  const fs::path out = scratch_root() / "empty";
  fs::remove_all(out);
  fs::create_directories(out);
  ExperimentConfig config = tiny_config((out / "never_run").string());
  std::ofstream(out / "config.json", std::ios::binary)
      << to_json(config).dump(2) << "\n";
  const std::string text = report(out.string());
  CHECK(text.find("no runs") != std::string::npos);
  CHECK_THROWS_AS(report((out / "not_there").string()), std::runtime_error);
}

TEST_CASE("report orders jacobian variances for ablation arms") {
  const fs::path out = scratch_root() / "ablation";
  fs::remove_all(out);
  ExperimentConfig config = tiny_config(out.string());
  config.runs = 1;
  config.train.max_iters = 30;
  config.arms = {ArmSpec{"vqcnni_softsign", ModelKind::VqCnni,
                         decoder::Activation::Softsign, "", ""},
                 ArmSpec{"vqcnni_sigmoid", ModelKind::VqCnni,
                         decoder::Activation::Sigmoid, "", ""}};
  run_experiment(config);
  const std::string text = report(out.string());
  CHECK(text.find("jacobian variance ascending:") != std::string::npos);
  const bool flagged =
      text.find("odd activations precede asymmetric: yes") !=
          std::string::npos ||
      text.find("odd activations precede asymmetric: no") != std::string::npos;
  CHECK(flagged);
}
