#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

namespace vqphase::spin {

enum class Axis { X, Y, Z };

constexpr std::array<Axis, 3> kAxes{Axis::X, Axis::Y, Axis::Z};

const char* axis_name(Axis axis);

/// Collective angular-momentum operator on the symmetric subspace,
/// dimensionless units (j = N/2).
struct CollectiveOperator {
  Axis axis;
  Eigen::MatrixXcd matrix;
};

/// exp(-i * angle * G) with G = J_axis (rotation) or J_axis^2 (twisting).
struct UnitaryGate {
  Axis axis;
  bool squared;  // generator is J_axis^2
  double angle;
  Eigen::MatrixXcd matrix;
};

/// Symmetric (Dicke) subspace of N two-level systems. Holds the collective
/// operators and their eigendecompositions; everything is immutable after
/// construction, so a DickeSpace can be shared freely across workers.
///
/// Basis ordering: m descending from +N/2 to -N/2. J_z is exactly diagonal
/// in this basis, so z-rotations and z-twistings come out exactly diagonal.
class DickeSpace {
 public:
  explicit DickeSpace(int n_particles);

  int n_particles() const { return n_particles_; }
  int dim() const { return n_particles_ + 1; }

  /// m-values in basis order (descending).
  const Eigen::VectorXd& basis_labels() const { return labels_; }

  const CollectiveOperator& op(Axis axis) const { return ops_[index(axis)]; }
  /// J_axis^2, cached.
  const Eigen::MatrixXcd& op_squared(Axis axis) const {
    return squared_[index(axis)];
  }

  UnitaryGate rotation(Axis axis, double angle) const;
  UnitaryGate twisting(Axis axis, double angle) const;

  /// d/d(angle) of the gate: -i * G * U. Exact since G commutes with U.
  Eigen::MatrixXcd gate_derivative(const UnitaryGate& gate) const;

  /// Smallest period L with gate(angle) == gate(angle + L) as a matrix,
  /// from the integer-spaced generator spectrum.
  double gate_period(Axis axis, bool squared) const;

 private:
  static int index(Axis axis) { return static_cast<int>(axis); }
  Eigen::MatrixXcd exponentiate(Axis axis, bool squared, double angle) const;

  int n_particles_;
  Eigen::VectorXd labels_;
  std::array<CollectiveOperator, 3> ops_;
  std::array<Eigen::MatrixXcd, 3> squared_;
  // cached eigendecomposition of each generator; decompose once, re-use
  // for every gate built on this space
  std::array<Eigen::VectorXd, 3> eigvals_;
  std::array<Eigen::MatrixXcd, 3> eigvecs_;
};

}  // namespace vqphase::spin
