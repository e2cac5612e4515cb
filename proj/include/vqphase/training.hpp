#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vqphase/decoder.hpp"
#include "vqphase/interferometer.hpp"
#include "vqphase/metrics.hpp"
#include "vqphase/spin.hpp"

namespace vqphase::training {

struct TrainConfig {
  int n_phi = 100;            // quadrature points of the training grid
  int max_iters = 2000;       // T
  int patience = 200;         // P
  int min_iters = 300;        // M_min
  int eval_interval = 10;     // K
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int eval_grid_size = 512;   // grid for the recorded SWPE trace
  std::uint64_t seed = 0;

  void validate() const;
};

struct GaussianPrior {
  double mean = 0.0;
  double stddev = 0.15707963267948966;  // pi / 20

  void validate() const;
};

struct EvalRecord {
  int epoch;
  double loss;
  double qfi;
  double swpe_median;  // exact-mode median over the eval grid
};

struct TrainTrace {
  std::vector<double> losses;      // one entry per completed epoch
  std::vector<EvalRecord> evals;   // every K epochs plus the final epoch
  double best_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  bool early_stopped = false;
};

/// Called at eval epochs with the post-update model state, after the
/// built-in qfi/swpe bookkeeping. Lets the harness store snapshots.
using EvalHook = std::function<void(const EvalRecord&,
                                    const interferometer::CircuitParams&,
                                    const decoder::Decoder&)>;

/// 1 - mean cos(phi - phi_est).
double circular_loss(const Eigen::VectorXd& true_phases,
                     const Eigen::VectorXd& est_phases);

/// Uniform endpoint-exclusive grid phi_i = -pi + 2 pi i / n.
Eigen::VectorXd phase_grid(int n);

struct AdamState {
  Eigen::VectorXd first;   // biased first-moment estimate
  Eigen::VectorXd second;  // biased second-moment estimate
  long long step = 0;

  explicit AdamState(int n)
      : first(Eigen::VectorXd::Zero(n)), second(Eigen::VectorXd::Zero(n)) {}
};

/// One bias-corrected Adam update in place.
void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, const TrainConfig& config);

/// Circuit parameters uniform in [-0.1, 0.1] (near-identity start).
interferometer::CircuitParams random_circuit_params(int layers_enc,
                                                    int layers_dec,
                                                    std::uint64_t seed);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;  // [flattened circuit params, decoder params]
};

/// Circular loss over the phase grid with its exact gradient w.r.t. the
/// full parameter set Theta = (circuit, decoder). Shared by the trainer
/// and by gradient verification.
LossGradient joint_loss_gradient(const spin::DickeSpace& space,
                                 const interferometer::CircuitParams& circuit,
                                 const decoder::Decoder& net,
                                 const Eigen::VectorXd& phases);

/// Bayesian mean squared error of the affine estimator and its gradient
/// w.r.t. [circuit params, slope, offset].
LossGradient vqi_loss_gradient(const spin::DickeSpace& space,
                               const interferometer::CircuitParams& circuit,
                               double slope, double offset,
                               const Eigen::VectorXd& nodes,
                               const Eigen::VectorXd& weights);

struct JointResult {
  interferometer::CircuitParams circuit;  // best snapshot
  Eigen::VectorXd decoder_params;         // best snapshot
  TrainTrace trace;
};

/// End-to-end optimization of the circuit and the decoder against the
/// circular loss on the fixed quadrature grid. Returns the best-loss
/// parameter snapshot. Throws std::runtime_error when the loss turns
/// non-finite.
JointResult train_joint(const spin::DickeSpace& space,
                        const TrainConfig& config,
                        const interferometer::CircuitParams& circuit_init,
                        const decoder::Decoder& decoder_init,
                        const EvalHook& hook = nullptr);

/// Same loop with the quantum parameters frozen at circuit_init.
JointResult train_decoder_fixed(const spin::DickeSpace& space,
                                const TrainConfig& config,
                                const interferometer::CircuitParams& circuit,
                                const decoder::Decoder& decoder_init,
                                const EvalHook& hook = nullptr);

struct VqiResult {
  interferometer::CircuitParams circuit;  // best snapshot
  double slope = 0.0;                     // phi_est(m) = slope * m + offset
  double offset = 0.0;
  TrainTrace trace;
};

/// Conventional baseline: minimize the Bayesian mean squared error of the
/// affine estimator slope*m + offset under a Gaussian prior, jointly over
/// circuit parameters and estimator coefficients. The prior expectation
/// uses a fixed uniform grid over mean +/- 4 stddev with normalized
/// Gaussian weights.
VqiResult train_vqi_baseline(const spin::DickeSpace& space,
                             const TrainConfig& config,
                             const GaussianPrior& prior,
                             const interferometer::CircuitParams& circuit_init);

/// Estimate for one measured distribution: wrap(slope * <m> + offset).
double vqi_estimate(const spin::DickeSpace& space, const VqiResult& model,
                    const Eigen::VectorXd& probabilities);

/// Decoder estimates on a phase grid, exact or sampled probabilities.
/// sample_seed seeds the per-phase shot noise (ignored when shots = 0).
Eigen::VectorXd nn_estimates(const spin::DickeSpace& space,
                             const interferometer::CircuitParams& circuit,
                             const decoder::Decoder& net,
                             const Eigen::VectorXd& phases, long long shots,
                             std::uint64_t sample_seed);

/// VQI estimates on a phase grid, exact or sampled.
Eigen::VectorXd vqi_estimates(const spin::DickeSpace& space,
                              const VqiResult& model,
                              const Eigen::VectorXd& phases, long long shots,
                              std::uint64_t sample_seed);

/// Mix run/stream indices into statistically independent sub-seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace vqphase::training
