#include "vqphase/analysis.hpp"

#include <stdexcept>

namespace vqphase::analysis {

FeatureMatrix feature_heatmap(const spin::DickeSpace& space,
                              const interferometer::CircuitParams& params,
                              const metrics::EvalGrid& grid) {
  interferometer::CircuitCache cache(space, params);
  FeatureMatrix out;
  out.phases = grid.phases;
  out.values.resize(grid.phases.size(), space.dim());
  for (Eigen::Index i = 0; i < grid.phases.size(); ++i)
    out.values.row(i) = cache.probabilities(grid.phases[i]).values.transpose();
  return out;
}

FeatureMatrix latent_matrix(const spin::DickeSpace& space,
                            const interferometer::CircuitParams& params,
                            const decoder::Decoder& net,
                            const metrics::EvalGrid& grid) {
  interferometer::CircuitCache cache(space, params);
  Eigen::MatrixXd probs(space.dim(), grid.phases.size());
  for (Eigen::Index i = 0; i < grid.phases.size(); ++i)
    probs.col(i) = cache.probabilities(grid.phases[i]).values;
  FeatureMatrix out;
  out.phases = grid.phases;
  out.values = net.latent(probs).transpose();
  return out;
}

Projection2D pca_2d(const FeatureMatrix& matrix) {
  const Eigen::Index n = matrix.values.rows();
  const Eigen::Index f = matrix.values.cols();
  if (n < 3) throw std::invalid_argument("pca needs at least 3 rows");

  Eigen::MatrixXd centered =
      matrix.values.rowwise() - matrix.values.colwise().mean();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pca eigendecomposition failed");

  // eigenvalues come out ascending
  const Eigen::VectorXd evals = solver.eigenvalues().cwiseMax(0.0);
  const double total = evals.sum();

  Projection2D out;
  out.phases = matrix.phases;
  out.points = Eigen::MatrixXd::Zero(n, 2);

  const double scale = std::max(evals[f - 1], 1.0);
  for (int comp = 0; comp < 2 && comp < f; ++comp) {
    const Eigen::Index col = f - 1 - comp;
    const double lambda = evals[col];
    // treat numerically-zero directions as absent rank
    if (lambda <= 1e-12 * scale) break;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index peak;
    v.cwiseAbs().maxCoeff(&peak);
    if (v[peak] < 0) v = -v;
    out.points.col(comp) = centered * v;
    const double fraction = total > 0 ? lambda / total : 0.0;
    if (comp == 0)
      out.explained1 = fraction;
    else
      out.explained2 = fraction;
  }
  return out;
}

Snapshot snapshot(int epoch, double qfi, double swpe_median,
                  const spin::DickeSpace& space,
                  const interferometer::CircuitParams& params,
                  const decoder::Decoder& net, const metrics::EvalGrid& grid) {
  Snapshot snap;
  snap.epoch = epoch;
  snap.qfi = qfi;
  snap.swpe_median = swpe_median;
  snap.heatmap = feature_heatmap(space, params, grid);
  snap.feature_projection = pca_2d(snap.heatmap);
  snap.latent = latent_matrix(space, params, net, grid);
  snap.latent_projection = pca_2d(snap.latent);
  return snap;
}

}  // namespace vqphase::analysis
