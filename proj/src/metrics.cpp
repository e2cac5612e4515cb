#include "vqphase/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vqphase::metrics {

namespace {
constexpr double pi = std::numbers::pi;
}

double wrap_angle(double angle) {
  double w = std::remainder(angle, 2 * pi);  // (-pi, pi]
  if (w == pi) w = -pi;
  return w;
}

double wrapped_error(double phi, double phi_est) {
  return wrap_angle(phi_est - phi);
}

double swpe_db(double delta_phi, double floor_db) {
  if (delta_phi == 0.0) return floor_db;
  return std::max(10.0 * std::log10(delta_phi * delta_phi), floor_db);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

EvalGrid EvalGrid::uniform(int n, long long shots) {
  if (n < 2) throw std::invalid_argument("grid needs at least 2 points");
  EvalGrid grid;
  grid.phases.resize(n);
  for (int i = 0; i < n; ++i) grid.phases[i] = -pi + 2 * pi * i / n;
  grid.shots = shots;
  return grid;
}

JacobianStats decoding_jacobian(const Estimator& estimator,
                                const EvalGrid& grid) {
  const int n = static_cast<int>(grid.phases.size());
  if (n < 16) throw std::invalid_argument("jacobian grid needs >= 16 points");
  const Eigen::VectorXd est = estimator(grid.phases);
  if (est.size() != n) throw std::invalid_argument("estimator size mismatch");

  JacobianStats stats;
  stats.per_phase.resize(n);
  for (int i = 0; i < n; ++i) {
    const int prev = (i + n - 1) % n;
    const int next = (i + 1) % n;
    const double dnum = wrap_angle(est[next] - est[prev]);
    const double dden = wrap_angle(grid.phases[next] - grid.phases[prev]);
    stats.per_phase[i] = dnum / dden;
  }
  stats.mean = stats.per_phase.mean();
  stats.variance = stats.per_phase.squaredNorm() / n - stats.mean * stats.mean;
  stats.variance = std::max(stats.variance, 0.0);
  return stats;
}

SwpeTable evaluate_swpe(const RunEstimator& estimator, const EvalGrid& grid,
                        int runs) {
  if (runs < 1) throw std::invalid_argument("need at least one run");
  const int n = static_cast<int>(grid.phases.size());
  SwpeTable table;
  table.phases = grid.phases;
  table.swpe_db.resize(runs, n);
  table.estimates.resize(runs, n);
  for (int r = 0; r < runs; ++r) {
    const Eigen::VectorXd est = estimator(r, grid.phases);
    if (est.size() != n) throw std::invalid_argument("estimator size mismatch");
    for (int i = 0; i < n; ++i) {
      table.estimates(r, i) = est[i];
      table.swpe_db(r, i) = swpe_db(wrapped_error(grid.phases[i], est[i]));
    }
  }
  table.rows.reserve(n);
  std::vector<double> column(runs);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < runs; ++r) column[r] = table.swpe_db(r, i);
    SwpeSummaryRow row;
    row.phase = grid.phases[i];
    row.median = percentile(column, 0.5);
    row.iqr = percentile(column, 0.75) - percentile(column, 0.25);
    row.mean = table.swpe_db.col(i).mean();
    row.p5 = percentile(column, 0.05);
    row.p95 = percentile(column, 0.95);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace vqphase::metrics
