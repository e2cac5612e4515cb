#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace vqphase::decoder {

/// Hidden-layer nonlinearity. Identity exists for gradient tests only.
enum class Activation {
  Softsign,
  Tanh,
  Arctan,
  Sigmoid,
  Elu,
  SoftsignShift,
  Identity,
};

constexpr std::array<Activation, 6> kStudyActivations{
    Activation::Softsign, Activation::Tanh,          Activation::Arctan,
    Activation::Sigmoid,  Activation::Elu,           Activation::SoftsignShift,
};

enum class Parity { Odd, Asymmetric };

const char* activation_name(Activation kind);
Activation activation_from_name(std::string_view name);
Parity activation_parity(Activation kind);

double activate(Activation kind, double x);
double activate_derivative(Activation kind, double x);

/// atan2 folded to [-pi, pi); (0, 0) maps to 0.
double phase_estimate(double s, double c);

/// Per-sample pass-through values kept for backpropagation.
struct ForwardTrace {
  Eigen::MatrixXd input;              // in x n
  std::vector<Eigen::MatrixXd> pre;   // affine outputs per layer
  std::vector<Eigen::MatrixXd> post;  // activated outputs per layer
};

/// Feed-forward network from a measurement distribution to the circular
/// phase representation (s, c). All batched calls treat columns as
/// samples. The final layer is affine with no activation.
class Decoder {
 public:
  Decoder(int input_width, std::vector<int> hidden, Activation activation);

  int input_width() const { return sizes_.front(); }
  int output_width() const { return sizes_.back(); }
  int latent_width() const { return sizes_[sizes_.size() - 2]; }
  Activation activation() const { return activation_; }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  /// Uniform weights in [-r, r] with r = sqrt(6 / (fan_in + fan_out)),
  /// zero biases. Deterministic in the seed.
  void init(std::uint64_t seed);

  int param_count() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& flat);

  /// Outputs (2 x n). Pass a trace to enable backward().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs,
                          ForwardTrace* trace = nullptr) const;

  /// Last hidden activations (latent_width x n).
  Eigen::MatrixXd latent(const Eigen::MatrixXd& inputs) const;

  /// phase_estimate applied to each output column.
  Eigen::VectorXd phase_estimates(const Eigen::MatrixXd& inputs) const;

  /// Reverse pass. upstream is dLoss/d(outputs), shape (2 x n). Returns
  /// the flat parameter gradient (same layout as params()); optionally
  /// writes dLoss/d(inputs).
  Eigen::VectorXd backward(const ForwardTrace& trace,
                           const Eigen::MatrixXd& upstream,
                           Eigen::MatrixXd* grad_input = nullptr) const;

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }

 private:
  std::vector<int> sizes_;  // [in, hidden..., 2]
  Activation activation_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

}  // namespace vqphase::decoder
