#pragma once

#include <Eigen/Dense>

#include "vqphase/decoder.hpp"
#include "vqphase/interferometer.hpp"
#include "vqphase/metrics.hpp"
#include "vqphase/spin.hpp"

namespace vqphase::analysis {

/// Phase-indexed feature rows: measurement probabilities (quantum
/// features) or decoder hidden activations (latent features).
struct FeatureMatrix {
  Eigen::VectorXd phases;  // one entry per row
  Eigen::MatrixXd values;  // rows = phases, cols = features
};

struct Projection2D {
  Eigen::VectorXd phases;
  Eigen::MatrixXd points;  // rows x 2
  double explained1 = 0.0;  // variance fractions, explained1 >= explained2
  double explained2 = 0.0;
};

/// Exact p(m | phi) for every grid phase; decoder-independent.
FeatureMatrix feature_heatmap(const spin::DickeSpace& space,
                              const interferometer::CircuitParams& params,
                              const metrics::EvalGrid& grid);

/// Penultimate-layer activations of the decoder on exact probabilities.
FeatureMatrix latent_matrix(const spin::DickeSpace& space,
                            const interferometer::CircuitParams& params,
                            const decoder::Decoder& net,
                            const metrics::EvalGrid& grid);

/// Mean-center, project on the top-2 covariance eigenvectors. Sign
/// convention: the largest-magnitude loading of each component is
/// positive. Rank-deficient input degrades to a zero second component
/// with zero explained variance.
Projection2D pca_2d(const FeatureMatrix& matrix);

/// One training-time record of the representation geometry.
struct Snapshot {
  int epoch = 0;
  double qfi = 0.0;
  double swpe_median = 0.0;
  FeatureMatrix heatmap;
  Projection2D feature_projection;
  FeatureMatrix latent;
  Projection2D latent_projection;
};

Snapshot snapshot(int epoch, double qfi, double swpe_median,
                  const spin::DickeSpace& space,
                  const interferometer::CircuitParams& params,
                  const decoder::Decoder& net, const metrics::EvalGrid& grid);

}  // namespace vqphase::analysis
