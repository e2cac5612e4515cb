#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "vqphase/analysis.hpp"
#include "vqphase/training.hpp"

using namespace vqphase;
using namespace vqphase::analysis;
using Eigen::MatrixXd;
using Eigen::VectorXd;
constexpr double pi = std::numbers::pi;

TEST_CASE("heatmap rows are normalized distributions") {
  spin::DickeSpace space(6);
  auto params = training::random_circuit_params(1, 1, 101);
  auto grid = metrics::EvalGrid::uniform(64);
  FeatureMatrix heat = feature_heatmap(space, params, grid);
  REQUIRE(heat.values.rows() == 64);
  REQUIRE(heat.values.cols() == 7);
  for (int i = 0; i < 64; ++i) {
    CHECK(std::abs(heat.values.row(i).sum() - 1.0) < 1e-9);
    CHECK(heat.values.row(i).minCoeff() > -1e-12);
  }
}

TEST_CASE("heatmap repeats across one full period") {
  spin::DickeSpace space(4);
  auto params = training::random_circuit_params(1, 1, 102);
  auto grid = metrics::EvalGrid::uniform(32);
  metrics::EvalGrid shifted = grid;
  shifted.phases = (grid.phases.array() + 2 * pi).matrix();
  FeatureMatrix a = feature_heatmap(space, params, grid);
  FeatureMatrix b = feature_heatmap(space, params, shifted);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("latent matrix shape and determinism") {
  spin::DickeSpace space(4);
  auto params = training::random_circuit_params(1, 1, 103);
  decoder::Decoder net(5, {12, 9}, decoder::Activation::Softsign);
  net.init(104);
  auto grid = metrics::EvalGrid::uniform(48);
  FeatureMatrix a = latent_matrix(space, params, net, grid);
  FeatureMatrix b = latent_matrix(space, params, net, grid);
  REQUIRE(a.values.rows() == 48);
  CHECK(a.values.cols() == 9);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pca on collinear rows has a zero second component") {
  FeatureMatrix m;
  m.phases = VectorXd::LinSpaced(20, -pi, pi);
  VectorXd direction(4);
  direction << 1.0, -2.0, 0.5, 3.0;
  m.values.resize(20, 4);
  for (int i = 0; i < 20; ++i) m.values.row(i) = (0.1 * i) * direction;
  Projection2D proj = pca_2d(m);
  CHECK(proj.explained1 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(proj.explained2 == 0.0);
  CHECK(proj.points.col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(proj.points.col(0).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("pca recovers a planar circle embedded in high dimension") {
  std::mt19937_64 rng(105);
  std::normal_distribution<double> g(0.0, 1.0);
  // random orthonormal pair in R^10
  VectorXd u(10), v(10);
  for (int i = 0; i < 10; ++i) u[i] = g(rng);
  u.normalize();
  for (int i = 0; i < 10; ++i) v[i] = g(rng);
  v -= u.dot(v) * u;
  v.normalize();

  FeatureMatrix m;
  const int n = 200;
  m.phases = VectorXd::LinSpaced(n, -pi, pi - 2 * pi / n);
  m.values.resize(n, 10);
  for (int i = 0; i < n; ++i)
    m.values.row(i) =
        (std::cos(m.phases[i]) * u + std::sin(m.phases[i]) * v).transpose();
  Projection2D proj = pca_2d(m);
  CHECK(proj.explained1 + proj.explained2 > 0.999);
  CHECK(proj.explained1 >= proj.explained2);
  CHECK(proj.explained2 > 0.3);  // circle spreads variance over both axes
  // radius preserved
  for (int i = 0; i < n; i += 17)
    CHECK(proj.points.row(i).norm() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("appending a constant column does not change the projection") {
  std::mt19937_64 rng(106);
  std::normal_distribution<double> g(0.0, 1.0);
  FeatureMatrix m;
  m.phases = VectorXd::LinSpaced(30, 0, 1);
  m.values.resize(30, 5);
  for (int i = 0; i < m.values.size(); ++i) m.values.data()[i] = g(rng);
  FeatureMatrix padded;
  padded.phases = m.phases;
  padded.values.resize(30, 6);
  padded.values.leftCols(5) = m.values;
  padded.values.col(5).setConstant(7.3);
  Projection2D a = pca_2d(m);
  Projection2D b = pca_2d(padded);
  CHECK((a.points - b.points).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(a.explained1 == doctest::Approx(b.explained1).epsilon(1e-12));
}

TEST_CASE("pca is equivariant under row permutation") {
  std::mt19937_64 rng(107);
  std::normal_distribution<double> g(0.0, 1.0);
  FeatureMatrix m;
  m.phases = VectorXd::LinSpaced(12, 0, 1);
  m.values.resize(12, 3);
  for (int i = 0; i < m.values.size(); ++i) m.values.data()[i] = g(rng);
  Projection2D base = pca_2d(m);

  FeatureMatrix reversed;
  reversed.phases = m.phases.reverse();
  reversed.values = m.values.colwise().reverse();
  Projection2D flipped = pca_2d(reversed);
  CHECK((base.points.colwise().reverse() - flipped.points)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("explained variances are ordered fractions") {
  std::mt19937_64 rng(108);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    FeatureMatrix m;
    m.phases = VectorXd::LinSpaced(25, 0, 1);
    m.values.resize(25, 6);
    for (int i = 0; i < m.values.size(); ++i) m.values.data()[i] = g(rng);
    Projection2D proj = pca_2d(m);
    CHECK(proj.explained1 >= proj.explained2);
    CHECK(proj.explained2 >= 0.0);
    CHECK(proj.explained1 <= 1.0);
  }
  FeatureMatrix tiny;
  tiny.phases = VectorXd::Zero(2);
  tiny.values = MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(pca_2d(tiny), std::invalid_argument);
}

TEST_CASE("all-constant input yields a fully degenerate projection") {
  FeatureMatrix m;
  m.phases = VectorXd::LinSpaced(10, 0, 1);
  m.values = MatrixXd::Constant(10, 4, 2.5);
  Projection2D proj = pca_2d(m);
  CHECK(proj.points.cwiseAbs().maxCoeff() == 0.0);
  CHECK(proj.explained1 == 0.0);
  CHECK(proj.explained2 == 0.0);
}

TEST_CASE("snapshot bundles the representation pieces consistently") {
  spin::DickeSpace space(3);
  auto params = training::random_circuit_params(1, 1, 109);
  decoder::Decoder net(4, {6, 5}, decoder::Activation::Tanh);
  net.init(110);
  auto grid = metrics::EvalGrid::uniform(32);
  Snapshot snap = snapshot(42, 3.1, -25.0, space, params, net, grid);
  CHECK(snap.epoch == 42);
  CHECK(snap.qfi == 3.1);
  CHECK(snap.swpe_median == -25.0);
  CHECK(snap.heatmap.values.rows() == 32);
  CHECK(snap.latent.values.cols() == 5);
  CHECK(snap.feature_projection.points.rows() == 32);
  CHECK(snap.latent_projection.points.rows() == 32);
  FeatureMatrix direct = feature_heatmap(space, params, grid);
  CHECK((snap.heatmap.values - direct.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trained latent manifold closes into a loop") {
  spin::DickeSpace space(2);
  training::TrainConfig cfg;
  cfg.max_iters = 400;
  cfg.min_iters = 50;
  cfg.patience = 400;
  cfg.n_phi = 40;
  cfg.eval_grid_size = 64;
  auto circuit = training::random_circuit_params(1, 1, 111);
  decoder::Decoder net(3, {16, 16}, decoder::Activation::Softsign);
  net.init(112);
  auto result = training::train_joint(space, cfg, circuit, net);
  decoder::Decoder trained(3, {16, 16}, decoder::Activation::Softsign);
  trained.set_params(result.decoder_params);

  auto grid = metrics::EvalGrid::uniform(128);
  Projection2D proj = pca_2d(latent_matrix(space, result.circuit, trained, grid));
  double diameter = 0.0;
  for (int i = 0; i < 128; i += 4)
    for (int j = i + 4; j < 128; j += 4)
      diameter = std::max(
          diameter, (proj.points.row(i) - proj.points.row(j)).norm());
  const double gap = (proj.points.row(0) - proj.points.row(127)).norm();
  CHECK(diameter > 0.0);
  CHECK(gap < 0.1 * diameter);
}
