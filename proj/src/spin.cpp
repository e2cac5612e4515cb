#include "vqphase/spin.hpp"

#include <cmath>
#include <stdexcept>

namespace vqphase::spin {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

const char* axis_name(Axis axis) {
  switch (axis) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "?";
}

DickeSpace::DickeSpace(int n_particles) : n_particles_(n_particles) {
  if (n_particles < 1) {
    throw std::invalid_argument("DickeSpace: n_particles must be >= 1");
  }
  const int d = dim();
  const double j = n_particles / 2.0;

  labels_.resize(d);
  for (int i = 0; i < d; ++i) labels_[i] = j - i;  // descending

  // ladder construction: <m+1|J+|m> = sqrt(j(j+1) - m(m+1))
  Eigen::MatrixXcd jp = Eigen::MatrixXcd::Zero(d, d);
  for (int col = 1; col < d; ++col) {
    const double m = labels_[col];
    jp(col - 1, col) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  const Eigen::MatrixXcd jm = jp.adjoint();

  ops_[index(Axis::X)] = {Axis::X, (jp + jm) / 2.0};
  ops_[index(Axis::Y)] = {Axis::Y, (jp - jm) / (2.0 * kI)};
  ops_[index(Axis::Z)] = {Axis::Z, labels_.cast<std::complex<double>>().asDiagonal()};

  for (Axis axis : kAxes) {
    const int k = index(axis);
    squared_[k] = ops_[k].matrix * ops_[k].matrix;
    if (axis == Axis::Z) {
      // diagonal already; keep the eigenbasis exactly the identity so
      // z-gates stay exactly diagonal
      eigvals_[k] = labels_;
      eigvecs_[k] = Eigen::MatrixXcd::Identity(d, d);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(ops_[k].matrix);
      if (solver.info() != Eigen::Success) {
        throw std::runtime_error("DickeSpace: eigendecomposition failed");
      }
      eigvals_[k] = solver.eigenvalues();
      eigvecs_[k] = solver.eigenvectors();
    }
  }
}

Eigen::MatrixXcd DickeSpace::exponentiate(Axis axis, bool squared,
                                          double angle) const {
  const int k = index(axis);
  const int d = dim();
  Eigen::VectorXcd phases(d);
  for (int i = 0; i < d; ++i) {
    const double lam = squared ? eigvals_[k][i] * eigvals_[k][i] : eigvals_[k][i];
    phases[i] = std::exp(-kI * angle * lam);
  }
  if (axis == Axis::Z) {
    return phases.asDiagonal();
  }
  return eigvecs_[k] * phases.asDiagonal() * eigvecs_[k].adjoint();
}

UnitaryGate DickeSpace::rotation(Axis axis, double angle) const {
  return {axis, false, angle, exponentiate(axis, false, angle)};
}

UnitaryGate DickeSpace::twisting(Axis axis, double angle) const {
  return {axis, true, angle, exponentiate(axis, true, angle)};
}

Eigen::MatrixXcd DickeSpace::gate_derivative(const UnitaryGate& gate) const {
  const Eigen::MatrixXcd& gen =
      gate.squared ? op_squared(gate.axis) : op(gate.axis).matrix;
  return -kI * gen * gate.matrix;
}

double DickeSpace::gate_period(Axis axis, bool squared) const {
  const int k = index(axis);
  // smallest integer t with t*lambda integral for every eigenvalue;
  // spectrum is m or m^2 with m integer or half-integer, so t <= 4
  for (int t = 1; t <= 8; ++t) {
    bool ok = true;
    for (int i = 0; i < dim(); ++i) {
      const double lam =
          squared ? eigvals_[k][i] * eigvals_[k][i] : eigvals_[k][i];
      if (std::abs(t * lam - std::round(t * lam)) > 1e-9) {
        ok = false;
        break;
      }
    }
    if (ok) return t * 2.0 * M_PI;
  }
  throw std::logic_error("gate_period: spectrum not rational with small denominator");
}

}  // namespace vqphase::spin
