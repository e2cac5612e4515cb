#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace vqphase::metrics {

/// Principal-argument wrap of (phi_est - phi) into [-pi, pi); +pi maps
/// to -pi.
double wrapped_error(double phi, double phi_est);

/// Wrap a single angle into [-pi, pi).
double wrap_angle(double angle);

/// 10 log10(delta^2), clamped below at floor_db so a perfect estimate
/// stays finite.
double swpe_db(double delta_phi, double floor_db = -160.0);

/// Interpolated percentile (linear between order statistics), q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Uniform endpoint-exclusive phase grid with an optional shot budget
/// (0 = exact probabilities).
struct EvalGrid {
  Eigen::VectorXd phases;
  long long shots = 0;

  static EvalGrid uniform(int n, long long shots = 0);
};

struct JacobianStats {
  double mean = 0.0;
  double variance = 0.0;
  Eigen::VectorXd per_phase;
};

/// Maps grid phases to estimates; the closure owns model and seeds.
using Estimator = std::function<Eigen::VectorXd(const Eigen::VectorXd& phases)>;

/// d(estimate)/d(phase) by central differences around the periodic grid,
/// with both numerator and denominator wrapped. Needs >= 16 points and
/// an exact (shot-free) estimator to be meaningful.
JacobianStats decoding_jacobian(const Estimator& estimator,
                                const EvalGrid& grid);

struct SwpeSummaryRow {
  double phase;
  double median;
  double iqr;
  double mean;
  double p5;
  double p95;
};

struct SwpeTable {
  Eigen::VectorXd phases;
  Eigen::MatrixXd swpe_db;  // runs x phases
  Eigen::MatrixXd estimates;  // runs x phases
  std::vector<SwpeSummaryRow> rows;
};

/// Per-run estimates evaluated on the grid; run indexes the trained model
/// and/or the sampling seed.
using RunEstimator =
    std::function<Eigen::VectorXd(int run, const Eigen::VectorXd& phases)>;

/// SWPE(dB) per (run, phase) plus per-phase aggregates across runs.
SwpeTable evaluate_swpe(const RunEstimator& estimator, const EvalGrid& grid,
                        int runs);

}  // namespace vqphase::metrics
