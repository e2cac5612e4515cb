#include "vqphase/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "vqphase/analysis.hpp"
#include "vqphase/interferometer.hpp"
#include "vqphase/metrics.hpp"
#include "vqphase/spin.hpp"

namespace vqphase::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string run_name(int run) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%03d", run);
  return buf;
}

std::string epoch_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%06d", epoch);
  return buf;
}

class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header)
      : columns_(header.size()) {
    append(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw std::logic_error("csv row width mismatch");
    append(cells);
  }

  void save(const fs::path& path) const { write_text(path, text_); }

 private:
  void append(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  std::string text_;
  std::size_t columns_;
};

json circuit_to_json(const interferometer::CircuitParams& params) {
  auto layers = [](const std::vector<interferometer::LayerParams>& side) {
    json out = json::array();
    for (const auto& layer : side) {
      json row = json::array();
      for (int k = 0; k < interferometer::LayerParams::kCount; ++k)
        row.push_back(layer[k]);
      out.push_back(row);
    }
    return out;
  };
  return json{{"encoding", layers(params.encoding)},
              {"decoding", layers(params.decoding)}};
}

interferometer::CircuitParams circuit_from_json(const json& j) {
  auto layers = [](const json& side) {
    std::vector<interferometer::LayerParams> out;
    for (const auto& row : side) {
      if (row.size() != interferometer::LayerParams::kCount)
        throw std::invalid_argument("circuit layer needs 5 entries");
      interferometer::LayerParams layer;
      for (int k = 0; k < interferometer::LayerParams::kCount; ++k)
        layer[k] = row[k].get<double>();
      out.push_back(layer);
    }
    return out;
  };
  interferometer::CircuitParams params;
  params.encoding = layers(j.at("encoding"));
  params.decoding = layers(j.at("decoding"));
  if (params.encoding.empty() || params.decoding.empty())
    throw std::invalid_argument("circuit needs encoding and decoding layers");
  return params;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("unknown key '" + item.key() + "' in " +
                                  where);
  }
}

std::string default_label(const ArmSpec& arm) {
  switch (arm.model) {
    case ModelKind::Vqi:
      return "vqi";
    case ModelKind::VqCnniFixed:
      return "vqcnni_fixed";
    case ModelKind::VqCnni:
      return std::string("vqcnni_") + decoder::activation_name(arm.activation);
  }
  return "arm";
}

bool directory_safe(const std::string& label) {
  if (label.empty()) return false;
  for (char c : label)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'))
      return false;
  return true;
}

std::string format_int(long long v) { return std::to_string(v); }

std::string format_uint(std::uint64_t v) { return std::to_string(v); }

double median_of(std::vector<double> values) {
  return metrics::percentile(std::move(values), 0.5);
}

// ---------------------------------------------------------------------
// per-run execution

struct RunOutput {
  RunSummary summary;
  Eigen::VectorXd exact_estimates;
  Eigen::VectorXd shot_estimates;
};

void write_projection_csv(const fs::path& path,
                          const analysis::Projection2D& proj) {
  CsvBuilder csv({"phase", "pc1", "pc2", "ev1", "ev2"});
  const std::string ev1 = format_double(proj.explained1);
  const std::string ev2 = format_double(proj.explained2);
  for (Eigen::Index i = 0; i < proj.points.rows(); ++i)
    csv.row({format_double(proj.phases[i]), format_double(proj.points(i, 0)),
             format_double(proj.points(i, 1)), ev1, ev2});
  csv.save(path);
}

void write_snapshot(const fs::path& dir, const spin::DickeSpace& space,
                    const analysis::Snapshot& snap) {
  fs::create_directories(dir);
  json meta{{"epoch", snap.epoch},
            {"qfi", snap.qfi},
            {"swpe_median", snap.swpe_median}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  CsvBuilder heat({"phase", "m", "probability"});
  const Eigen::VectorXd& labels = space.basis_labels();
  for (Eigen::Index i = 0; i < snap.heatmap.values.rows(); ++i)
    for (Eigen::Index k = 0; k < snap.heatmap.values.cols(); ++k)
      heat.row({format_double(snap.heatmap.phases[i]),
                format_double(labels[k]),
                format_double(snap.heatmap.values(i, k))});
  heat.save(dir / "heatmap.csv");

  write_projection_csv(dir / "feature_projection.csv",
                       snap.feature_projection);
  write_projection_csv(dir / "latent_projection.csv", snap.latent_projection);
}

RunOutput execute_run(const ExperimentConfig& config, const ArmSpec& arm,
                      int run, const fs::path& run_dir,
                      const fs::path& source_dir,
                      const std::string& source_note) {
  RunOutput out;
  RunSummary& s = out.summary;
  s.run = run;
  s.seed = config.base_seed + static_cast<std::uint64_t>(run);
  s.best_loss = s.qfi = s.swpe_final = s.swpe_at_qfi_max = kNan;
  s.median_swpe_exact = s.median_swpe_shots = kNan;
  s.j_mean = s.j_var = s.j_positive_frac = kNan;
  out.exact_estimates = Eigen::VectorXd::Constant(config.eval_grid, kNan);
  if (config.eval_shots > 0)
    out.shot_estimates = Eigen::VectorXd::Constant(config.eval_grid, kNan);

  try {
    fs::create_directories(run_dir);
    const std::uint64_t qseed = training::derive_seed(s.seed, 1);
    const std::uint64_t dseed = training::derive_seed(s.seed, 2);
    const std::uint64_t sseed = training::derive_seed(s.seed, 3);

    spin::DickeSpace space(config.n_particles);
    const metrics::EvalGrid grid = metrics::EvalGrid::uniform(config.eval_grid);
    training::TrainConfig tc = config.train;
    tc.seed = s.seed;

    interferometer::CircuitParams circuit_init = training::random_circuit_params(
        config.encoding_layers, config.decoding_layers, qseed);

    json params_json;
    params_json["run"] = run;
    params_json["seed"] = s.seed;
    params_json["model"] = model_kind_name(arm.model);

    training::EvalHook hook;
    if (config.snapshot_detail && arm.model != ModelKind::Vqi)
      hook = [&](const training::EvalRecord& rec,
                 const interferometer::CircuitParams& c,
                 const decoder::Decoder& net) {
        analysis::Snapshot snap = analysis::snapshot(
            rec.epoch, rec.qfi, rec.swpe_median, space, c, net, grid);
        write_snapshot(run_dir / "snapshots" / epoch_name(rec.epoch), space,
                       snap);
      };

    interferometer::CircuitParams final_circuit;
    std::optional<decoder::Decoder> trained_net;
    training::VqiResult vqi_model;
    training::TrainTrace trace;

    if (arm.model == ModelKind::Vqi) {
      vqi_model = training::train_vqi_baseline(space, tc, config.prior,
                                               circuit_init);
      final_circuit = vqi_model.circuit;
      trace = vqi_model.trace;
      params_json["estimator"] = {{"slope", vqi_model.slope},
                                  {"offset", vqi_model.offset}};
    } else {
      if (arm.model == ModelKind::VqCnniFixed) {
        const fs::path source = source_dir / run_name(run) / "params.json";
        std::ifstream in(source);
        if (!in)
          throw std::runtime_error("missing source artifact " +
                                   source.string());
        circuit_init = circuit_from_json(json::parse(in).at("circuit"));
        params_json["source_run"] = source_note + "/" + run_name(run) +
                                    "/params.json";
      }
      decoder::Decoder net(space.dim(), config.hidden, arm.activation);
      net.init(dseed);
      training::JointResult res =
          arm.model == ModelKind::VqCnniFixed
              ? training::train_decoder_fixed(space, tc, circuit_init, net,
                                              hook)
              : training::train_joint(space, tc, circuit_init, net, hook);
      final_circuit = res.circuit;
      trace = std::move(res.trace);
      trained_net.emplace(space.dim(), config.hidden, arm.activation);
      trained_net->set_params(res.decoder_params);
      params_json["decoder"] = {
          {"activation", decoder::activation_name(arm.activation)},
          {"input_width", space.dim()},
          {"hidden", config.hidden},
          {"params",
           std::vector<double>(res.decoder_params.data(),
                               res.decoder_params.data() +
                                   res.decoder_params.size())}};
    }

    auto estimate = [&](const Eigen::VectorXd& phases, long long shots,
                        std::uint64_t sample_seed) {
      if (arm.model == ModelKind::Vqi)
        return training::vqi_estimates(space, vqi_model, phases, shots,
                                       sample_seed);
      return training::nn_estimates(space, final_circuit, *trained_net, phases,
                                    shots, sample_seed);
    };

    out.exact_estimates = estimate(grid.phases, 0, 0);
    if (config.eval_shots > 0)
      out.shot_estimates = estimate(grid.phases, config.eval_shots, sseed);

    const metrics::JacobianStats jac = metrics::decoding_jacobian(
        [&](const Eigen::VectorXd& phases) { return estimate(phases, 0, 0); },
        grid);
    s.j_mean = jac.mean;
    s.j_var = jac.variance;
    s.j_positive_frac =
        static_cast<double>((jac.per_phase.array() > 0.0).count()) /
        static_cast<double>(jac.per_phase.size());

    s.qfi = interferometer::qfi(space, final_circuit);
    s.best_loss = trace.best_loss;
    s.best_epoch = trace.best_epoch;
    s.epochs_run = trace.epochs_run;
    if (!trace.evals.empty()) {
      s.final_epoch = trace.evals.back().epoch;
      s.swpe_final = trace.evals.back().swpe_median;
      double best_qfi = -std::numeric_limits<double>::infinity();
      for (const auto& rec : trace.evals)
        if (rec.qfi > best_qfi) {
          best_qfi = rec.qfi;
          s.qfi_max_epoch = rec.epoch;
          s.swpe_at_qfi_max = rec.swpe_median;
        }
    }

    std::vector<double> swpe_exact(config.eval_grid);
    for (int i = 0; i < config.eval_grid; ++i)
      swpe_exact[i] = metrics::swpe_db(
          metrics::wrapped_error(grid.phases[i], out.exact_estimates[i]));
    s.median_swpe_exact = median_of(swpe_exact);
    if (config.eval_shots > 0) {
      std::vector<double> swpe_shots(config.eval_grid);
      for (int i = 0; i < config.eval_grid; ++i)
        swpe_shots[i] = metrics::swpe_db(
            metrics::wrapped_error(grid.phases[i], out.shot_estimates[i]));
      s.median_swpe_shots = median_of(swpe_shots);
    }

    // artifacts
    params_json["status"] = "ok";
    params_json["best_loss"] = trace.best_loss;
    params_json["best_epoch"] = trace.best_epoch;
    params_json["epochs_run"] = trace.epochs_run;
    params_json["early_stopped"] = trace.early_stopped;
    params_json["circuit"] = circuit_to_json(final_circuit);
    write_text(run_dir / "params.json", params_json.dump(2) + "\n");

    CsvBuilder trace_csv({"epoch", "loss"});
    for (std::size_t t = 0; t < trace.losses.size(); ++t)
      trace_csv.row({format_int(static_cast<long long>(t) + 1),
                     format_double(trace.losses[t])});
    trace_csv.save(run_dir / "trace.csv");

    CsvBuilder traj({"epoch", "qfi", "swpe_median"});
    for (const auto& rec : trace.evals)
      traj.row({format_int(rec.epoch), format_double(rec.qfi),
                format_double(rec.swpe_median)});
    traj.save(run_dir / "trajectory.csv");

    CsvBuilder eval({"run", "phase", "phi_est", "delta_phi", "swpe_db",
                     "mode"});
    auto eval_rows = [&](const Eigen::VectorXd& est, const char* mode) {
      for (int i = 0; i < config.eval_grid; ++i) {
        const double delta = metrics::wrapped_error(grid.phases[i], est[i]);
        eval.row({format_int(run), format_double(grid.phases[i]),
                  format_double(est[i]), format_double(delta),
                  format_double(metrics::swpe_db(delta)), mode});
      }
    };
    eval_rows(out.exact_estimates, "exact");
    if (config.eval_shots > 0) eval_rows(out.shot_estimates, "shots");
    eval.save(run_dir / "eval_phase.csv");

    CsvBuilder jac_csv({"phase", "jacobian"});
    for (Eigen::Index i = 0; i < jac.per_phase.size(); ++i)
      jac_csv.row(
          {format_double(grid.phases[i]), format_double(jac.per_phase[i])});
    jac_csv.save(run_dir / "jacobian.csv");

    s.ok = true;
  } catch (const std::exception& e) {
    s.ok = false;
    s.error = e.what();
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (!ec) {
      std::ofstream err(run_dir / "error.txt", std::ios::binary);
      err << e.what() << "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------
// summaries

void write_run_summary(const fs::path& path, const ArmResult& arm) {
  CsvBuilder csv({"run", "status", "seed", "best_loss", "best_epoch",
                  "epochs_run", "final_epoch", "qfi", "qfi_max_epoch",
                  "swpe_final", "swpe_at_qfi_max", "median_swpe_exact",
                  "median_swpe_shots", "j_mean", "j_var", "j_positive_frac"});
  for (const RunSummary& s : arm.runs)
    csv.row({format_int(s.run), s.ok ? "ok" : "failed", format_uint(s.seed),
             format_double(s.best_loss), format_int(s.best_epoch),
             format_int(s.epochs_run), format_int(s.final_epoch),
             format_double(s.qfi), format_int(s.qfi_max_epoch),
             format_double(s.swpe_final), format_double(s.swpe_at_qfi_max),
             format_double(s.median_swpe_exact),
             format_double(s.median_swpe_shots), format_double(s.j_mean),
             format_double(s.j_var), format_double(s.j_positive_frac)});
  csv.save(path);
}

void write_swpe_summary(const fs::path& path, const ExperimentConfig& config,
                        const ArmResult& arm) {
  CsvBuilder csv({"mode", "phase", "median", "iqr", "mean", "p5", "p95"});
  std::vector<int> ok;
  for (const RunSummary& s : arm.runs)
    if (s.ok) ok.push_back(s.run);

  auto add_mode = [&](const Eigen::MatrixXd& estimates, const char* mode) {
    if (ok.empty() || estimates.size() == 0) return;
    const metrics::EvalGrid grid = metrics::EvalGrid::uniform(config.eval_grid);
    const metrics::SwpeTable table = metrics::evaluate_swpe(
        [&](int run, const Eigen::VectorXd&) -> Eigen::VectorXd {
          return estimates.row(ok[static_cast<std::size_t>(run)]);
        },
        grid, static_cast<int>(ok.size()));
    for (const metrics::SwpeSummaryRow& row : table.rows)
      csv.row({mode, format_double(row.phase), format_double(row.median),
               format_double(row.iqr), format_double(row.mean),
               format_double(row.p5), format_double(row.p95)});
  };
  add_mode(arm.exact_estimates, "exact");
  if (config.eval_shots > 0) add_mode(arm.shot_estimates, "shots");
  csv.save(path);
}

void write_jacobian_summary(const fs::path& path,
                            const std::vector<ArmResult>& arms) {
  CsvBuilder csv({"model", "j_mean", "j_var"});
  for (const ArmResult& arm : arms) {
    double mean_sum = 0.0, var_sum = 0.0;
    int n = 0;
    for (const RunSummary& s : arm.runs)
      if (s.ok) {
        mean_sum += s.j_mean;
        var_sum += s.j_var;
        ++n;
      }
    csv.row({arm.spec.label, format_double(n ? mean_sum / n : kNan),
             format_double(n ? var_sum / n : kNan)});
  }
  csv.save(path);
}

}  // namespace

// -----------------------------------------------------------------------
// names & config

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::VqCnni:
      return "vqcnni";
    case ModelKind::Vqi:
      return "vqi";
    case ModelKind::VqCnniFixed:
      return "vqcnni_fixed";
  }
  throw std::invalid_argument("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "vqcnni") return ModelKind::VqCnni;
  if (name == "vqi") return ModelKind::Vqi;
  if (name == "vqcnni_fixed") return ModelKind::VqCnniFixed;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("experiment name is empty");
  if (n_particles < 1) throw std::invalid_argument("n_particles must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("decoder needs hidden layers");
  for (int w : hidden)
    if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  if (encoding_layers < 1 || decoding_layers < 1)
    throw std::invalid_argument("circuit needs >= 1 layer per side");
  train.validate();
  prior.validate();
  if (eval_grid < 16) throw std::invalid_argument("eval_grid must be >= 16");
  if (eval_shots < 0) throw std::invalid_argument("eval_shots must be >= 0");
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (workers < 0) throw std::invalid_argument("workers must be >= 0");
  if (out_dir.empty()) throw std::invalid_argument("out_dir is empty");
  if (arms.empty()) throw std::invalid_argument("experiment needs >= 1 arm");
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const ArmSpec& arm = arms[i];
    if (!directory_safe(arm.label))
      throw std::invalid_argument("arm label '" + arm.label +
                                  "' must be non-empty [a-z0-9_]");
    for (std::size_t k = 0; k < i; ++k)
      if (arms[k].label == arm.label)
        throw std::invalid_argument("duplicate arm label '" + arm.label + "'");
    if (arm.model == ModelKind::VqCnniFixed) {
      const bool by_label = !arm.source_arm.empty();
      const bool by_dir = !arm.source_dir.empty();
      if (by_label == by_dir)
        throw std::invalid_argument(
            "arm '" + arm.label +
            "': vqcnni_fixed needs exactly one of source_arm/source_dir");
      if (by_label) {
        bool found = false;
        for (std::size_t k = 0; k < i; ++k)
          if (arms[k].label == arm.source_arm) {
            found = true;
            break;
          }
        if (!found)
          throw std::invalid_argument("arm '" + arm.label + "': source_arm '" +
                                      arm.source_arm +
                                      "' is not an earlier arm");
      }
    } else if (!arm.source_arm.empty() || !arm.source_dir.empty()) {
      throw std::invalid_argument("arm '" + arm.label +
                                  "': source_* only applies to vqcnni_fixed");
    }
  }
}

json to_json(const ExperimentConfig& config) {
  json arms = json::array();
  for (const ArmSpec& arm : config.arms) {
    json a{{"label", arm.label}, {"model", model_kind_name(arm.model)}};
    if (arm.model != ModelKind::Vqi)
      a["activation"] = decoder::activation_name(arm.activation);
    if (!arm.source_arm.empty()) a["source_arm"] = arm.source_arm;
    if (!arm.source_dir.empty()) a["source_dir"] = arm.source_dir;
    arms.push_back(std::move(a));
  }
  return json{
      {"name", config.name},
      {"n_particles", config.n_particles},
      {"hidden", config.hidden},
      {"encoding_layers", config.encoding_layers},
      {"decoding_layers", config.decoding_layers},
      {"train",
       {{"n_phi", config.train.n_phi},
        {"max_iters", config.train.max_iters},
        {"patience", config.train.patience},
        {"min_iters", config.train.min_iters},
        {"eval_interval", config.train.eval_interval},
        {"learning_rate", config.train.learning_rate},
        {"beta1", config.train.beta1},
        {"beta2", config.train.beta2},
        {"epsilon", config.train.epsilon},
        {"eval_grid_size", config.train.eval_grid_size}}},
      {"prior", {{"mean", config.prior.mean}, {"stddev", config.prior.stddev}}},
      {"eval_grid", config.eval_grid},
      {"eval_shots", config.eval_shots},
      {"runs", config.runs},
      {"base_seed", config.base_seed},
      {"workers", config.workers},
      {"snapshot_detail", config.snapshot_detail},
      {"out_dir", config.out_dir},
      {"arms", std::move(arms)}};
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j,
             {"name", "n_particles", "hidden", "encoding_layers",
              "decoding_layers", "train", "prior", "eval_grid", "eval_shots",
              "runs", "base_seed", "workers", "snapshot_detail", "out_dir",
              "arms"},
             "config");
  ExperimentConfig config;
  config.name = j.value("name", config.name);
  config.n_particles = j.value("n_particles", config.n_particles);
  config.hidden = j.value("hidden", config.hidden);
  config.encoding_layers = j.value("encoding_layers", config.encoding_layers);
  config.decoding_layers = j.value("decoding_layers", config.decoding_layers);
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t,
               {"n_phi", "max_iters", "patience", "min_iters", "eval_interval",
                "learning_rate", "beta1", "beta2", "epsilon",
                "eval_grid_size"},
               "train");
    config.train.n_phi = t.value("n_phi", config.train.n_phi);
    config.train.max_iters = t.value("max_iters", config.train.max_iters);
    config.train.patience = t.value("patience", config.train.patience);
    config.train.min_iters = t.value("min_iters", config.train.min_iters);
    config.train.eval_interval =
        t.value("eval_interval", config.train.eval_interval);
    config.train.learning_rate =
        t.value("learning_rate", config.train.learning_rate);
    config.train.beta1 = t.value("beta1", config.train.beta1);
    config.train.beta2 = t.value("beta2", config.train.beta2);
    config.train.epsilon = t.value("epsilon", config.train.epsilon);
    config.train.eval_grid_size =
        t.value("eval_grid_size", config.train.eval_grid_size);
  }
  if (j.contains("prior")) {
    const json& p = j.at("prior");
    check_keys(p, {"mean", "stddev"}, "prior");
    config.prior.mean = p.value("mean", config.prior.mean);
    config.prior.stddev = p.value("stddev", config.prior.stddev);
  }
  config.eval_grid = j.value("eval_grid", config.eval_grid);
  config.eval_shots = j.value("eval_shots", config.eval_shots);
  config.runs = j.value("runs", config.runs);
  config.base_seed = j.value("base_seed", config.base_seed);
  config.workers = j.value("workers", config.workers);
  config.snapshot_detail = j.value("snapshot_detail", config.snapshot_detail);
  config.out_dir = j.value("out_dir", config.out_dir);
  if (j.contains("arms")) {
    config.arms.clear();
    for (const json& a : j.at("arms")) {
      check_keys(a, {"label", "model", "activation", "source_arm",
                     "source_dir"},
                 "arm");
      ArmSpec arm;
      arm.model = model_kind_from_name(a.value("model", "vqcnni"));
      if (a.contains("activation"))
        arm.activation =
            decoder::activation_from_name(a.at("activation").get<std::string>());
      arm.source_arm = a.value("source_arm", "");
      arm.source_dir = a.value("source_dir", "");
      arm.label = a.value("label", default_label(arm));
      config.arms.push_back(std::move(arm));
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return config_from_json(json::parse(in));
}

void apply_override(json& config, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key=value: " + spec);
  std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);
  for (char& c : path)
    if (c == '.') c = '/';
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare strings stay strings
  }
  config[json::json_pointer("/" + path)] = std::move(parsed);
}

std::vector<std::string> preset_names() {
  return {"fig2_global", "fig3_representation", "fig4_dynamics",
          "fig5_activations"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig config;
  config.name = name;
  config.out_dir = "results/" + name;
  if (name == "fig2_global") {
    config.runs = 20;
    config.eval_shots = 1000000;
    config.arms = {
        ArmSpec{"vqcnni_softsign", ModelKind::VqCnni,
                decoder::Activation::Softsign, "", ""},
        ArmSpec{"vqi", ModelKind::Vqi, decoder::Activation::Softsign, "", ""}};
  } else if (name == "fig3_representation") {
    config.runs = 20;
    config.arms = {
        ArmSpec{"vqi", ModelKind::Vqi, decoder::Activation::Softsign, "", ""},
        ArmSpec{"vqcnni_softsign", ModelKind::VqCnni,
                decoder::Activation::Softsign, "", ""},
        ArmSpec{"vqcnni_fixed", ModelKind::VqCnniFixed,
                decoder::Activation::Softsign, "vqi", ""}};
  } else if (name == "fig4_dynamics") {
    config.runs = 1;
    config.snapshot_detail = true;
    config.arms = {ArmSpec{"vqcnni_softsign", ModelKind::VqCnni,
                           decoder::Activation::Softsign, "", ""}};
  } else if (name == "fig5_activations") {
    config.runs = 10;
    // Longer budget than the other presets: the ablation compares converged
    // decoders, and the odd activations are still descending at 2000 epochs
    // while the asymmetric ones have already plateaued.
    config.train.max_iters = 4000;
    config.arms.clear();
    for (decoder::Activation act : decoder::kStudyActivations)
      config.arms.push_back(ArmSpec{
          std::string("vqcnni_") + decoder::activation_name(act),
          ModelKind::VqCnni, act, "", ""});
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  config.validate();
  return config;
}

// -----------------------------------------------------------------------
// experiment execution

bool ExperimentResult::all_ok() const {
  for (const ArmResult& arm : arms)
    for (const RunSummary& s : arm.runs)
      if (!s.ok) return false;
  return true;
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool verbose) {
  config.validate();
  const fs::path root(config.out_dir);
  fs::create_directories(root / "arms");
  fs::create_directories(root / "summary");
  write_text(root / "config.json", to_json(config).dump(2) + "\n");

  ExperimentResult result;
  result.config = config;
  std::mutex io_mutex;

  for (const ArmSpec& arm : config.arms) {
    fs::path source_dir;
    std::string source_note;
    if (arm.model == ModelKind::VqCnniFixed) {
      if (arm.source_arm.empty()) {
        source_dir = fs::path(arm.source_dir);
        source_note = arm.source_dir;
      } else {
        // recorded root-relative so artifacts stay location-independent
        source_dir = root / "arms" / arm.source_arm;
        source_note = "arms/" + arm.source_arm;
      }
    }

    ArmResult ar;
    ar.spec = arm;
    ar.runs.resize(config.runs);
    ar.exact_estimates =
        Eigen::MatrixXd::Constant(config.runs, config.eval_grid, kNan);
    if (config.eval_shots > 0)
      ar.shot_estimates =
          Eigen::MatrixXd::Constant(config.runs, config.eval_grid, kNan);

    int n_workers = config.workers > 0
                        ? config.workers
                        : static_cast<int>(std::max(
                              1u, std::thread::hardware_concurrency()));
    n_workers = std::min(n_workers, config.runs);

    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int i = next.fetch_add(1); i < config.runs;
           i = next.fetch_add(1)) {
        const auto t0 = std::chrono::steady_clock::now();
        RunOutput out = execute_run(config, arm, i,
                                    root / "arms" / arm.label / run_name(i),
                                    source_dir, source_note);
        const double dt = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        std::lock_guard<std::mutex> lock(io_mutex);
        ar.runs[static_cast<std::size_t>(i)] = out.summary;
        ar.exact_estimates.row(i) = out.exact_estimates;
        if (config.eval_shots > 0) ar.shot_estimates.row(i) = out.shot_estimates;
        if (verbose) {
          if (out.summary.ok)
            std::printf(
                "[%s/%s] run %d/%d ok  swpe_exact=%.1f dB  qfi=%.2f  (%.1fs)\n",
                config.name.c_str(), arm.label.c_str(), i + 1, config.runs,
                out.summary.median_swpe_exact, out.summary.qfi, dt);
          else
            std::printf("[%s/%s] run %d/%d FAILED: %s\n", config.name.c_str(),
                        arm.label.c_str(), i + 1, config.runs,
                        out.summary.error.c_str());
          std::fflush(stdout);
        }
      }
    };

    if (n_workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(n_workers));
      for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }

    write_run_summary(root / "summary" / ("run_summary_" + arm.label + ".csv"),
                      ar);
    write_swpe_summary(
        root / "summary" / ("swpe_summary_" + arm.label + ".csv"), config, ar);
    result.arms.push_back(std::move(ar));
  }

  write_jacobian_summary(root / "summary" / "jacobian_summary.csv",
                         result.arms);
  return result;
}

// -----------------------------------------------------------------------
// reporting

namespace {

std::string fixed6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string report(const std::string& out_dir) {
  const fs::path root(out_dir);
  std::ifstream in(root / "config.json");
  if (!in)
    throw std::runtime_error("no config.json under " + out_dir);
  const ExperimentConfig config = config_from_json(json::parse(in));

  std::ostringstream text;
  text << "experiment " << config.name << ": n_particles=" << config.n_particles
       << " runs=" << config.runs << " eval_shots=" << config.eval_shots
       << " base_seed=" << config.base_seed << "\n\n";
  text << "arm, model, ok_runs, median_swpe_exact_db, median_swpe_shots_db, "
          "j_mean, j_var, qfi\n";

  struct ArmAggregate {
    std::string label;
    decoder::Activation activation;
    bool is_vqcnni = false;
    int ok = 0;
    double j_var = kNan;
  };
  std::vector<ArmAggregate> aggregates;
  int failures = 0;

  for (const ArmSpec& arm : config.arms) {
    const fs::path csv_path =
        root / "summary" / ("run_summary_" + arm.label + ".csv");
    ArmAggregate agg;
    agg.label = arm.label;
    agg.activation = arm.activation;
    agg.is_vqcnni = arm.model == ModelKind::VqCnni;

    if (!fs::exists(csv_path)) {
      text << arm.label << ", " << model_kind_name(arm.model) << ", no runs\n";
      aggregates.push_back(agg);
      continue;
    }
    const CsvTable table = read_csv(csv_path.string());
    const int c_status = table.col("status");
    std::vector<double> swpe_exact, swpe_shots, j_means, j_vars, qfis;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (table.rows[r][static_cast<std::size_t>(c_status)] != "ok") {
        ++failures;
        continue;
      }
      swpe_exact.push_back(table.number(r, table.col("median_swpe_exact")));
      const double shots_med = table.number(r, table.col("median_swpe_shots"));
      if (std::isfinite(shots_med)) swpe_shots.push_back(shots_med);
      j_means.push_back(table.number(r, table.col("j_mean")));
      j_vars.push_back(table.number(r, table.col("j_var")));
      qfis.push_back(table.number(r, table.col("qfi")));
    }
    agg.ok = static_cast<int>(swpe_exact.size());
    if (table.rows.empty() || agg.ok == 0) {
      text << arm.label << ", " << model_kind_name(arm.model) << ", no runs\n";
      aggregates.push_back(agg);
      continue;
    }
    auto mean_of = [](const std::vector<double>& v) {
      double acc = 0.0;
      for (double x : v) acc += x;
      return acc / static_cast<double>(v.size());
    };
    agg.j_var = mean_of(j_vars);
    text << arm.label << ", " << model_kind_name(arm.model) << ", " << agg.ok
         << "/" << table.rows.size() << ", " << fixed6(median_of(swpe_exact))
         << ", "
         << (swpe_shots.empty() ? std::string("nan")
                                : fixed6(median_of(swpe_shots)))
         << ", " << fixed6(mean_of(j_means)) << ", " << fixed6(agg.j_var)
         << ", " << fixed6(mean_of(qfis)) << "\n";
    aggregates.push_back(agg);
  }

  // activation-ablation ordering over the vqcnni arms
  std::vector<const ArmAggregate*> ablation;
  for (const ArmAggregate& agg : aggregates)
    if (agg.is_vqcnni && agg.ok > 0) ablation.push_back(&agg);
  if (ablation.size() >= 2) {
    std::stable_sort(ablation.begin(), ablation.end(),
                     [](const ArmAggregate* a, const ArmAggregate* b) {
                       return a->j_var < b->j_var;
                     });
    text << "\njacobian variance ascending:";
    bool seen_asymmetric = false;
    bool odd_first = true;
    int odd = 0, asym = 0;
    for (const ArmAggregate* agg : ablation) {
      text << " " << agg->label << " (" << fixed6(agg->j_var) << ")";
      const bool is_odd =
          decoder::activation_parity(agg->activation) == decoder::Parity::Odd;
      if (is_odd) {
        ++odd;
        if (seen_asymmetric) odd_first = false;
      } else {
        ++asym;
        seen_asymmetric = true;
      }
    }
    text << "\nodd activations precede asymmetric: "
         << (odd == 0 || asym == 0 ? "n/a" : odd_first ? "yes" : "no") << "\n";
  }

  if (failures > 0)
    text << "\nfailed runs: " << failures << "\n";
  return text.str();
}

// -----------------------------------------------------------------------
// csv utilities

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const std::to_chars_result res =
      std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

int CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

double CsvTable::number(std::size_t row, int column) const {
  if (row >= rows.size() || column < 0 ||
      static_cast<std::size_t>(column) >= rows[row].size())
    throw std::out_of_range("csv cell out of range");
  const std::string& cell = rows[row][static_cast<std::size_t>(column)];
  double value = kNan;
  const std::from_chars_result res =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw std::invalid_argument("not a number: '" + cell + "'");
  return value;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(
          start, comma == std::string::npos ? std::string::npos
                                            : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

}  // namespace vqphase::harness
