#include "vqphase/training.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace vqphase::training {

namespace {

constexpr double pi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd probability_columns(const interferometer::CircuitCache& cache,
                                    const Eigen::VectorXd& phases,
                                    long long shots, std::uint64_t sample_seed) {
  const int d = cache.space().dim();
  Eigen::MatrixXd probs(d, phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    interferometer::ProbabilityVector p = cache.probabilities(phases[i]);
    if (shots > 0)
      p = interferometer::sample(p, shots,
                                 derive_seed(sample_seed,
                                             static_cast<std::uint64_t>(i)));
    probs.col(i) = p.values;
  }
  return probs;
}

struct DecoderGradient {
  double loss;
  Eigen::VectorXd grad;        // decoder parameters
  Eigen::MatrixXd grad_input;  // dLoss/d(probabilities), d x n
};

// Circular loss of the decoder on fixed input columns, with exact
// gradients on the decoder parameters and on the inputs.
DecoderGradient decoder_loss_gradient(const decoder::Decoder& net,
                                      const Eigen::MatrixXd& inputs,
                                      const Eigen::VectorXd& phases,
                                      bool want_input_grad) {
  const int n = static_cast<int>(phases.size());
  decoder::ForwardTrace trace;
  const Eigen::MatrixXd outputs = net.forward(inputs, &trace);
  Eigen::VectorXd est(n);
  for (int i = 0; i < n; ++i)
    est[i] = decoder::phase_estimate(outputs(0, i), outputs(1, i));
  DecoderGradient out;
  out.loss = circular_loss(phases, est);

  Eigen::MatrixXd upstream(2, n);
  for (int i = 0; i < n; ++i) {
    const double s = outputs(0, i), c = outputs(1, i);
    const double denom = s * s + c * c;
    const double dl = -std::sin(phases[i] - est[i]) / n;
    if (denom == 0.0) {
      upstream(0, i) = upstream(1, i) = 0.0;
    } else {
      upstream(0, i) = dl * c / denom;
      upstream(1, i) = dl * -s / denom;
    }
  }
  out.grad = net.backward(trace, upstream,
                          want_input_grad ? &out.grad_input : nullptr);
  return out;
}

double exact_swpe_median(const spin::DickeSpace& space,
                         const interferometer::CircuitParams& circuit,
                         const decoder::Decoder& net, int grid_size) {
  const Eigen::VectorXd phases = phase_grid(grid_size);
  const Eigen::VectorXd est = nn_estimates(space, circuit, net, phases, 0, 0);
  std::vector<double> vals(phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    vals[i] = metrics::swpe_db(metrics::wrapped_error(phases[i], est[i]));
  return metrics::percentile(vals, 0.5);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream));
}

void TrainConfig::validate() const {
  if (n_phi < 2) throw std::invalid_argument("n_phi must be >= 2");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (min_iters >= max_iters)
    throw std::invalid_argument("min_iters must be < max_iters");
  if (eval_interval < 1)
    throw std::invalid_argument("eval_interval must be >= 1");
  if (learning_rate < 0)
    throw std::invalid_argument("learning rate must be >= 0");
  if (eval_grid_size < 16)
    throw std::invalid_argument("eval grid needs >= 16 points");
}

void GaussianPrior::validate() const {
  if (!(stddev > 0)) throw std::invalid_argument("prior stddev must be > 0");
}

double circular_loss(const Eigen::VectorXd& true_phases,
                     const Eigen::VectorXd& est_phases) {
  if (true_phases.size() == 0) throw std::invalid_argument("empty phase set");
  if (true_phases.size() != est_phases.size())
    throw std::invalid_argument("phase vectors differ in length");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < true_phases.size(); ++i)
    acc += std::cos(true_phases[i] - est_phases[i]);
  return 1.0 - acc / static_cast<double>(true_phases.size());
}

Eigen::VectorXd phase_grid(int n) {
  if (n < 2) throw std::invalid_argument("phase grid needs >= 2 points");
  Eigen::VectorXd grid(n);
  for (int i = 0; i < n; ++i) grid[i] = -pi + 2 * pi * i / n;
  return grid;
}

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, const TrainConfig& config) {
  if (params.size() != grad.size() || params.size() != state.first.size())
    throw std::invalid_argument("adam dimensions disagree");
  state.step += 1;
  state.first = config.beta1 * state.first + (1 - config.beta1) * grad;
  state.second =
      config.beta2 * state.second + (1 - config.beta2) * grad.cwiseAbs2();
  const double c1 = 1 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1 - std::pow(config.beta2, static_cast<double>(state.step));
  params -= (config.learning_rate / c1) *
            (state.first.array() /
             ((state.second / c2).cwiseSqrt().array() + config.epsilon))
                .matrix();
}

interferometer::CircuitParams random_circuit_params(int layers_enc,
                                                    int layers_dec,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  Eigen::VectorXd flat(
      (layers_enc + layers_dec) * interferometer::LayerParams::kCount);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = u(rng);
  return interferometer::CircuitParams::unflatten(flat, layers_enc,
                                                  layers_dec);
}

LossGradient joint_loss_gradient(const spin::DickeSpace& space,
                                 const interferometer::CircuitParams& circuit,
                                 const decoder::Decoder& net,
                                 const Eigen::VectorXd& phases) {
  interferometer::CircuitCache cache(space, circuit);
  const Eigen::MatrixXd probs = probability_columns(cache, phases, 0, 0);
  const DecoderGradient dg = decoder_loss_gradient(net, probs, phases, true);

  const int nq = cache.encoding_count() + cache.decoding_count();
  Eigen::VectorXd qgrad = Eigen::VectorXd::Zero(nq);
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    const interferometer::ProbabilityJacobian jac = cache.jacobian(phases[i]);
    qgrad.head(cache.encoding_count()) +=
        jac.d_encoding.transpose() * dg.grad_input.col(i);
    qgrad.tail(cache.decoding_count()) +=
        jac.d_decoding.transpose() * dg.grad_input.col(i);
  }

  LossGradient out;
  out.loss = dg.loss;
  out.grad.resize(nq + dg.grad.size());
  out.grad << qgrad, dg.grad;
  return out;
}

LossGradient vqi_loss_gradient(const spin::DickeSpace& space,
                               const interferometer::CircuitParams& circuit,
                               double slope, double offset,
                               const Eigen::VectorXd& nodes,
                               const Eigen::VectorXd& weights) {
  if (nodes.size() != weights.size())
    throw std::invalid_argument("quadrature nodes/weights disagree");
  interferometer::CircuitCache cache(space, circuit);
  const Eigen::VectorXd& m = space.basis_labels();
  const int nq = cache.encoding_count() + cache.decoding_count();

  double loss = 0.0, dslope = 0.0, doffset = 0.0;
  Eigen::VectorXd qgrad = Eigen::VectorXd::Zero(nq);
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    const Eigen::VectorXd p = cache.probabilities(nodes[i]).values;
    const Eigen::VectorXd residual =
        ((slope * m).array() + offset - nodes[i]).matrix();
    loss += weights[i] * p.dot(residual.cwiseAbs2());
    dslope += weights[i] * 2 * p.dot(residual.cwiseProduct(m));
    doffset += weights[i] * 2 * p.dot(residual);
    const interferometer::ProbabilityJacobian jac = cache.jacobian(nodes[i]);
    const Eigen::VectorXd r2 = weights[i] * residual.cwiseAbs2();
    qgrad.head(cache.encoding_count()) += jac.d_encoding.transpose() * r2;
    qgrad.tail(cache.decoding_count()) += jac.d_decoding.transpose() * r2;
  }

  LossGradient out;
  out.loss = loss;
  out.grad.resize(nq + 2);
  out.grad << qgrad, dslope, doffset;
  return out;
}

namespace {

JointResult run_joint_loop(const spin::DickeSpace& space,
                           const TrainConfig& config,
                           const interferometer::CircuitParams& circuit_init,
                           const decoder::Decoder& decoder_init,
                           const EvalHook& hook, bool freeze_quantum) {
  config.validate();
  const int layers_enc = static_cast<int>(circuit_init.encoding.size());
  const int layers_dec = static_cast<int>(circuit_init.decoding.size());
  const Eigen::VectorXd phases = phase_grid(config.n_phi);

  interferometer::CircuitParams circuit = circuit_init;
  decoder::Decoder net = decoder_init;
  const int nq =
      freeze_quantum ? 0 : static_cast<int>(circuit.flatten().size());
  const int nd = net.param_count();
  AdamState adam(nq + nd);

  TrainTrace trace;
  double best_loss = std::numeric_limits<double>::infinity();
  interferometer::CircuitParams best_circuit = circuit;
  Eigen::VectorXd best_decoder = net.params();
  int best_epoch = 0;
  int no_improve = 0;

  // with frozen quantum parameters the training inputs never change
  Eigen::MatrixXd frozen_probs;
  if (freeze_quantum) {
    interferometer::CircuitCache cache(space, circuit);
    frozen_probs = probability_columns(cache, phases, 0, 0);
  }

  for (int t = 1; t <= config.max_iters; ++t) {
    double loss;
    Eigen::VectorXd grad;
    if (freeze_quantum) {
      DecoderGradient dg =
          decoder_loss_gradient(net, frozen_probs, phases, false);
      loss = dg.loss;
      grad = std::move(dg.grad);
    } else {
      LossGradient lg = joint_loss_gradient(space, circuit, net, phases);
      loss = lg.loss;
      grad = std::move(lg.grad);
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("training loss became non-finite at epoch " +
                               std::to_string(t));
    trace.losses.push_back(loss);

    // best snapshot is the parameter set that produced this loss,
    // captured before the optimizer step
    if (loss < best_loss) {
      best_loss = loss;
      best_epoch = t;
      best_circuit = circuit;
      best_decoder = net.params();
      no_improve = 0;
    } else {
      ++no_improve;
    }

    Eigen::VectorXd params(nq + nd);
    if (freeze_quantum)
      params = net.params();
    else
      params << circuit.flatten(), net.params();
    adam_step(adam, params, grad, config);
    if (freeze_quantum) {
      net.set_params(params);
    } else {
      circuit = interferometer::CircuitParams::unflatten(
          params.head(nq), layers_enc, layers_dec);
      net.set_params(params.tail(nd));
    }
    trace.epochs_run = t;

    const bool stop = t > config.min_iters && no_improve >= config.patience;
    const bool final_epoch = stop || t == config.max_iters;
    if (t % config.eval_interval == 0 || final_epoch) {
      EvalRecord rec;
      rec.epoch = t;
      rec.loss = loss;
      rec.qfi = interferometer::qfi(space, circuit);
      rec.swpe_median =
          exact_swpe_median(space, circuit, net, config.eval_grid_size);
      trace.evals.push_back(rec);
      if (hook) hook(rec, circuit, net);
    }
    if (stop) {
      trace.early_stopped = true;
      break;
    }
  }

  trace.best_loss = best_loss;
  trace.best_epoch = best_epoch;

  JointResult result;
  result.circuit = freeze_quantum ? circuit_init : best_circuit;
  result.decoder_params = best_decoder;
  result.trace = std::move(trace);
  return result;
}

}  // namespace

JointResult train_joint(const spin::DickeSpace& space,
                        const TrainConfig& config,
                        const interferometer::CircuitParams& circuit_init,
                        const decoder::Decoder& decoder_init,
                        const EvalHook& hook) {
  return run_joint_loop(space, config, circuit_init, decoder_init, hook,
                        false);
}

JointResult train_decoder_fixed(const spin::DickeSpace& space,
                                const TrainConfig& config,
                                const interferometer::CircuitParams& circuit,
                                const decoder::Decoder& decoder_init,
                                const EvalHook& hook) {
  return run_joint_loop(space, config, circuit, decoder_init, hook, true);
}

VqiResult train_vqi_baseline(const spin::DickeSpace& space,
                             const TrainConfig& config,
                             const GaussianPrior& prior,
                             const interferometer::CircuitParams& circuit_init) {
  config.validate();
  prior.validate();
  const int layers_enc = static_cast<int>(circuit_init.encoding.size());
  const int layers_dec = static_cast<int>(circuit_init.decoding.size());
  const int n = config.n_phi;

  // fixed quadrature over mean +/- 4 sigma with normalized Gaussian weights
  Eigen::VectorXd nodes(n), weights(n);
  for (int i = 0; i < n; ++i) {
    const double x = prior.mean - 4 * prior.stddev +
                     8 * prior.stddev * i / static_cast<double>(n - 1);
    nodes[i] = x;
    const double z = (x - prior.mean) / prior.stddev;
    weights[i] = std::exp(-0.5 * z * z);
  }
  weights /= weights.sum();

  const Eigen::VectorXd& m = space.basis_labels();
  interferometer::CircuitParams circuit = circuit_init;
  const int nq = static_cast<int>(circuit.flatten().size());

  // closed-form affine estimator for the initial circuit: normal equations
  // of min_{a,b} sum_i w_i E_i[(a m + b - phi_i)^2]
  double slope = 0.0, offset = 0.0;
  {
    interferometer::CircuitCache cache(space, circuit);
    double A = 0, B = 0, C = 0, D = 0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd p = cache.probabilities(nodes[i]).values;
      const double em = m.dot(p);
      A += weights[i] * m.cwiseAbs2().dot(p);
      B += weights[i] * em;
      C += weights[i] * em * nodes[i];
      D += weights[i] * nodes[i];
    }
    const double det = A - B * B;
    slope = std::abs(det) > 1e-12 ? (C - B * D) / det : 0.0;
    offset = D - slope * B;
  }

  AdamState adam(nq + 2);
  TrainTrace trace;
  double best_loss = std::numeric_limits<double>::infinity();
  interferometer::CircuitParams best_circuit = circuit;
  double best_slope = slope, best_offset = offset;
  int best_epoch = 0;
  int no_improve = 0;

  for (int t = 1; t <= config.max_iters; ++t) {
    const LossGradient lg =
        vqi_loss_gradient(space, circuit, slope, offset, nodes, weights);
    if (!std::isfinite(lg.loss))
      throw std::runtime_error("baseline loss became non-finite at epoch " +
                               std::to_string(t));
    trace.losses.push_back(lg.loss);

    if (lg.loss < best_loss) {
      best_loss = lg.loss;
      best_epoch = t;
      best_circuit = circuit;
      best_slope = slope;
      best_offset = offset;
      no_improve = 0;
    } else {
      ++no_improve;
    }

    Eigen::VectorXd params(nq + 2);
    params << circuit.flatten(), slope, offset;
    adam_step(adam, params, lg.grad, config);
    circuit = interferometer::CircuitParams::unflatten(params.head(nq),
                                                       layers_enc, layers_dec);
    slope = params[nq];
    offset = params[nq + 1];
    trace.epochs_run = t;

    const bool stop = t > config.min_iters && no_improve >= config.patience;
    const bool final_epoch = stop || t == config.max_iters;
    if (t % config.eval_interval == 0 || final_epoch) {
      EvalRecord rec;
      rec.epoch = t;
      rec.loss = lg.loss;
      rec.qfi = interferometer::qfi(space, circuit);
      VqiResult current;
      current.circuit = circuit;
      current.slope = slope;
      current.offset = offset;
      const Eigen::VectorXd grid = phase_grid(config.eval_grid_size);
      const Eigen::VectorXd est = vqi_estimates(space, current, grid, 0, 0);
      std::vector<double> vals(grid.size());
      for (Eigen::Index k = 0; k < grid.size(); ++k)
        vals[k] = metrics::swpe_db(metrics::wrapped_error(grid[k], est[k]));
      rec.swpe_median = metrics::percentile(vals, 0.5);
      trace.evals.push_back(rec);
    }
    if (stop) {
      trace.early_stopped = true;
      break;
    }
  }

  trace.best_loss = best_loss;
  trace.best_epoch = best_epoch;

  VqiResult result;
  result.circuit = best_circuit;
  result.slope = best_slope;
  result.offset = best_offset;
  result.trace = std::move(trace);
  return result;
}

double vqi_estimate(const spin::DickeSpace& space, const VqiResult& model,
                    const Eigen::VectorXd& probabilities) {
  const double mean_m = space.basis_labels().dot(probabilities);
  return metrics::wrap_angle(model.slope * mean_m + model.offset);
}

Eigen::VectorXd nn_estimates(const spin::DickeSpace& space,
                             const interferometer::CircuitParams& circuit,
                             const decoder::Decoder& net,
                             const Eigen::VectorXd& phases, long long shots,
                             std::uint64_t sample_seed) {
  interferometer::CircuitCache cache(space, circuit);
  const Eigen::MatrixXd probs =
      probability_columns(cache, phases, shots, sample_seed);
  return net.phase_estimates(probs);
}

Eigen::VectorXd vqi_estimates(const spin::DickeSpace& space,
                              const VqiResult& model,
                              const Eigen::VectorXd& phases, long long shots,
                              std::uint64_t sample_seed) {
  interferometer::CircuitCache cache(space, model.circuit);
  const Eigen::MatrixXd probs =
      probability_columns(cache, phases, shots, sample_seed);
  Eigen::VectorXd est(phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    est[i] = vqi_estimate(space, model, probs.col(i));
  return est;
}

}  // namespace vqphase::training
