#pragma once

#include <cstdint>
#include <vector>

#include "vqphase/spin.hpp"

namespace vqphase::interferometer {

/// One variational layer: product R_z(rot_z) R_x(rot_x) R_y(rot_y)
/// T_x(twist_x) T_y(twist_y), rightmost factor applied first.
struct LayerParams {
  double rot_z = 0.0;
  double rot_x = 0.0;
  double rot_y = 0.0;
  double twist_x = 0.0;
  double twist_y = 0.0;

  static constexpr int kCount = 5;
  double operator[](int i) const;
  double& operator[](int i);
};

/// Encoding/decoding angles of the Ramsey-type circuit. Angles are stored
/// unwrapped so gradients stay smooth.
struct CircuitParams {
  std::vector<LayerParams> encoding{LayerParams{}};
  std::vector<LayerParams> decoding{LayerParams{}};

  int encoding_count() const { return static_cast<int>(encoding.size()) * LayerParams::kCount; }
  int decoding_count() const { return static_cast<int>(decoding.size()) * LayerParams::kCount; }

  Eigen::VectorXd flatten() const;
  static CircuitParams unflatten(const Eigen::VectorXd& values, int layers_enc,
                                 int layers_dec);
};

/// Measurement distribution over the N+1 outcomes.
struct ProbabilityVector {
  enum class Kind { Exact, Empirical };
  Eigen::VectorXd values;
  Kind kind = Kind::Exact;
  long long shots = 0;  // 0 for exact
};

enum class ParamRole { Fixed, Encoding, Decoding, Phase };

/// One gate of a circuit, in application order. Trainable gates carry the
/// index of their angle within the flattened encoding/decoding vector.
struct GateSpec {
  spin::Axis axis;
  bool squared;
  double angle;
  ParamRole role;
  int param_index = -1;
};

/// Gate list of Eq.-style Ramsey circuit:
/// R_x(pi/2) U_De(params.decoding) R_z(phi) U_En(params.encoding) R_y(pi/2),
/// returned in application order (R_y pulse first). The phase gate carries
/// role Phase and angle 0; the actual phase is supplied per query.
std::vector<GateSpec> ramsey_sequence(const CircuitParams& params);

/// d p(m)/d(parameter) for every outcome m.
struct ProbabilityJacobian {
  Eigen::MatrixXd d_encoding;  // dim x encoding_count
  Eigen::MatrixXd d_decoding;  // dim x decoding_count
  Eigen::VectorXd d_phase;     // dim
};

/// Precomputed circuit for a fixed parameter set. Builds every gate matrix
/// and the phase-independent prefix/suffix products once, so per-phase
/// probability and Jacobian queries are cheap. Immutable once built; safe
/// to share across threads.
class CircuitCache {
 public:
  CircuitCache(const spin::DickeSpace& space, const CircuitParams& params);
  /// Custom gate list; must contain exactly one Phase-role gate, which
  /// must be an unsquared z-rotation.
  CircuitCache(const spin::DickeSpace& space, std::vector<GateSpec> sequence);

  const spin::DickeSpace& space() const { return *space_; }

  /// State just before the phase gate (after the preparation pulse and
  /// the encoding layers).
  const Eigen::VectorXcd& probe_state() const { return probe_; }

  Eigen::VectorXcd state(double phi) const;
  ProbabilityVector probabilities(double phi) const;
  ProbabilityJacobian jacobian(double phi) const;

  /// 4 Var(J_z) on the probe state; independent of phi and the decoding
  /// parameters by construction.
  double qfi() const;

  int encoding_count() const { return n_enc_; }
  int decoding_count() const { return n_dec_; }

 private:
  // Derivative of the probe state w.r.t. one pre-phase angle; the final
  // derivative is post_product_ * (phase factors ⊙ seed).
  struct PreSeed {
    ParamRole role;
    int col;
    Eigen::VectorXcd seed;
  };
  // Collapsed operator suffix * dG/dangle * prefix for one post-phase
  // angle; the final derivative is matrix * (phase factors ⊙ probe).
  struct PostDerivative {
    ParamRole role;
    int col;
    Eigen::MatrixXcd matrix;
  };

  void build();
  Eigen::VectorXcd phase_factors(double phi) const;

  const spin::DickeSpace* space_;
  std::vector<GateSpec> sequence_;
  int phase_pos_ = -1;
  int n_enc_ = 0;
  int n_dec_ = 0;

  Eigen::VectorXcd probe_;
  Eigen::MatrixXcd post_product_;  // product of all gates after the phase gate
  std::vector<PreSeed> pre_seeds_;
  std::vector<PostDerivative> post_derivs_;
};

/// Basis vector on m = -N/2 (all spins down).
Eigen::VectorXcd initial_state(const spin::DickeSpace& space);

/// Ordered product of the full Ramsey circuit at phase phi.
Eigen::MatrixXcd full_unitary(const spin::DickeSpace& space, double phi,
                              const CircuitParams& params);

ProbabilityVector probabilities(const spin::DickeSpace& space, double phi,
                                const CircuitParams& params);

ProbabilityJacobian probability_jacobian(const spin::DickeSpace& space,
                                         double phi,
                                         const CircuitParams& params);

double qfi(const spin::DickeSpace& space, const CircuitParams& params);

/// 4 Var(J_z) of an arbitrary pure state.
double qfi_of_state(const spin::DickeSpace& space,
                    const Eigen::VectorXcd& state);

/// Multinomial draw; returns counts/shots. Deterministic given the seed.
ProbabilityVector sample(const ProbabilityVector& exact, long long shots,
                         std::uint64_t seed);

}  // namespace vqphase::interferometer
