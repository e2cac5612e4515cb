#include "vqphase/interferometer.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace vqphase::interferometer {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr std::complex<double> kImag{0.0, 1.0};
}  // namespace

double LayerParams::operator[](int i) const {
  switch (i) {
    case 0: return rot_z;
    case 1: return rot_x;
    case 2: return rot_y;
    case 3: return twist_x;
    case 4: return twist_y;
    default: throw std::out_of_range("layer parameter index");
  }
}

double& LayerParams::operator[](int i) {
  switch (i) {
    case 0: return rot_z;
    case 1: return rot_x;
    case 2: return rot_y;
    case 3: return twist_x;
    case 4: return twist_y;
    default: throw std::out_of_range("layer parameter index");
  }
}

Eigen::VectorXd CircuitParams::flatten() const {
  Eigen::VectorXd out(encoding_count() + decoding_count());
  int k = 0;
  for (const auto& layer : encoding)
    for (int i = 0; i < LayerParams::kCount; ++i) out[k++] = layer[i];
  for (const auto& layer : decoding)
    for (int i = 0; i < LayerParams::kCount; ++i) out[k++] = layer[i];
  return out;
}

CircuitParams CircuitParams::unflatten(const Eigen::VectorXd& values,
                                       int layers_enc, int layers_dec) {
  const int expected = (layers_enc + layers_dec) * LayerParams::kCount;
  if (values.size() != expected)
    throw std::invalid_argument("parameter vector has wrong length");
  CircuitParams out;
  out.encoding.assign(layers_enc, LayerParams{});
  out.decoding.assign(layers_dec, LayerParams{});
  int k = 0;
  for (auto& layer : out.encoding)
    for (int i = 0; i < LayerParams::kCount; ++i) layer[i] = values[k++];
  for (auto& layer : out.decoding)
    for (int i = 0; i < LayerParams::kCount; ++i) layer[i] = values[k++];
  return out;
}

std::vector<GateSpec> ramsey_sequence(const CircuitParams& params) {
  std::vector<GateSpec> seq;
  seq.reserve(2 + LayerParams::kCount *
                      (params.encoding.size() + params.decoding.size()) + 1);
  seq.push_back({spin::Axis::Y, false, kHalfPi, ParamRole::Fixed, -1});

  auto push_layer = [&seq](const LayerParams& layer, ParamRole role, int base) {
    // template R_z R_x R_y T_x T_y, rightmost applied first
    seq.push_back({spin::Axis::Y, true, layer.twist_y, role, base + 4});
    seq.push_back({spin::Axis::X, true, layer.twist_x, role, base + 3});
    seq.push_back({spin::Axis::Y, false, layer.rot_y, role, base + 2});
    seq.push_back({spin::Axis::X, false, layer.rot_x, role, base + 1});
    seq.push_back({spin::Axis::Z, false, layer.rot_z, role, base + 0});
  };

  for (std::size_t l = 0; l < params.encoding.size(); ++l)
    push_layer(params.encoding[l], ParamRole::Encoding,
               static_cast<int>(l) * LayerParams::kCount);
  seq.push_back({spin::Axis::Z, false, 0.0, ParamRole::Phase, -1});
  for (std::size_t l = 0; l < params.decoding.size(); ++l)
    push_layer(params.decoding[l], ParamRole::Decoding,
               static_cast<int>(l) * LayerParams::kCount);
  seq.push_back({spin::Axis::X, false, kHalfPi, ParamRole::Fixed, -1});
  return seq;
}

Eigen::VectorXcd initial_state(const spin::DickeSpace& space) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(space.dim());
  psi[space.dim() - 1] = 1.0;  // labels run from +N/2 down to -N/2
  return psi;
}

CircuitCache::CircuitCache(const spin::DickeSpace& space,
                           const CircuitParams& params)
    : CircuitCache(space, ramsey_sequence(params)) {}

CircuitCache::CircuitCache(const spin::DickeSpace& space,
                           std::vector<GateSpec> sequence)
    : space_(&space), sequence_(std::move(sequence)) {
  for (int i = 0; i < static_cast<int>(sequence_.size()); ++i) {
    const GateSpec& g = sequence_[i];
    if (g.role == ParamRole::Phase) {
      if (phase_pos_ >= 0)
        throw std::invalid_argument("circuit has more than one phase gate");
      if (g.axis != spin::Axis::Z || g.squared)
        throw std::invalid_argument("phase gate must be a z rotation");
      phase_pos_ = i;
    } else if (g.role == ParamRole::Encoding) {
      n_enc_ = std::max(n_enc_, g.param_index + 1);
    } else if (g.role == ParamRole::Decoding) {
      n_dec_ = std::max(n_dec_, g.param_index + 1);
    }
  }
  if (phase_pos_ < 0) throw std::invalid_argument("circuit has no phase gate");
  build();
}

void CircuitCache::build() {
  const int count = static_cast<int>(sequence_.size());

  // Pre-phase sweep: running state plus a derivative seed per trainable
  // angle, all propagated with the same gates.
  Eigen::VectorXcd psi = initial_state(*space_);
  for (int i = 0; i < phase_pos_; ++i) {
    const GateSpec& g = sequence_[i];
    const Eigen::MatrixXcd gate = g.squared
                                      ? space_->twisting(g.axis, g.angle).matrix
                                      : space_->rotation(g.axis, g.angle).matrix;
    for (auto& seed : pre_seeds_) seed.seed = gate * seed.seed;
    if (g.role != ParamRole::Fixed) {
      spin::UnitaryGate u{g.axis, g.squared, g.angle, gate};
      pre_seeds_.push_back(
          {g.role, g.param_index, space_->gate_derivative(u) * psi});
    }
    psi = gate * psi;
  }
  probe_ = psi;

  // Post-phase sweep: collapse each trainable gate's derivative into a
  // single matrix suffix * dG * prefix.
  std::vector<Eigen::MatrixXcd> post_gates;
  std::vector<const GateSpec*> post_specs;
  for (int i = phase_pos_ + 1; i < count; ++i) {
    const GateSpec& g = sequence_[i];
    post_gates.push_back(g.squared
                             ? space_->twisting(g.axis, g.angle).matrix
                             : space_->rotation(g.axis, g.angle).matrix);
    post_specs.push_back(&g);
  }
  const int d = space_->dim();
  const int n_post = static_cast<int>(post_gates.size());
  std::vector<Eigen::MatrixXcd> prefixes(n_post + 1);
  prefixes[0] = Eigen::MatrixXcd::Identity(d, d);
  for (int i = 0; i < n_post; ++i) prefixes[i + 1] = post_gates[i] * prefixes[i];
  post_product_ = prefixes[n_post];

  Eigen::MatrixXcd suffix = Eigen::MatrixXcd::Identity(d, d);
  for (int i = n_post - 1; i >= 0; --i) {
    const GateSpec& g = *post_specs[i];
    if (g.role != ParamRole::Fixed) {
      spin::UnitaryGate u{g.axis, g.squared, g.angle, post_gates[i]};
      post_derivs_.push_back(
          {g.role, g.param_index,
           suffix * (space_->gate_derivative(u) * prefixes[i])});
    }
    suffix = suffix * post_gates[i];
  }
}

Eigen::VectorXcd CircuitCache::phase_factors(double phi) const {
  const auto& m = space_->basis_labels();
  Eigen::VectorXcd f(space_->dim());
  for (int i = 0; i < space_->dim(); ++i) f[i] = std::polar(1.0, -phi * m[i]);
  return f;
}

Eigen::VectorXcd CircuitCache::state(double phi) const {
  return post_product_ * phase_factors(phi).cwiseProduct(probe_).eval();
}

ProbabilityVector CircuitCache::probabilities(double phi) const {
  ProbabilityVector out;
  out.values = state(phi).cwiseAbs2();
  return out;
}

ProbabilityJacobian CircuitCache::jacobian(double phi) const {
  const int d = space_->dim();
  const Eigen::VectorXcd f = phase_factors(phi);
  const Eigen::VectorXcd mid = f.cwiseProduct(probe_);
  const Eigen::VectorXcd final_state = post_product_ * mid;

  ProbabilityJacobian out;
  out.d_encoding = Eigen::MatrixXd::Zero(d, n_enc_);
  out.d_decoding = Eigen::MatrixXd::Zero(d, n_dec_);

  auto accumulate = [&](ParamRole role, int col, const Eigen::VectorXcd& dpsi) {
    Eigen::VectorXd dp =
        2.0 * final_state.conjugate().cwiseProduct(dpsi).real();
    if (role == ParamRole::Encoding)
      out.d_encoding.col(col) += dp;
    else
      out.d_decoding.col(col) += dp;
  };

  for (const auto& seed : pre_seeds_)
    accumulate(seed.role, seed.col,
               post_product_ * f.cwiseProduct(seed.seed).eval());
  for (const auto& pd : post_derivs_)
    accumulate(pd.role, pd.col, pd.matrix * mid);

  const auto& m = space_->basis_labels();
  Eigen::VectorXcd dmid(d);
  for (int i = 0; i < d; ++i) dmid[i] = -kImag * m[i] * mid[i];
  out.d_phase =
      2.0 * final_state.conjugate()
                .cwiseProduct((post_product_ * dmid).eval())
                .real();
  return out;
}

double CircuitCache::qfi() const { return qfi_of_state(*space_, probe_); }

double qfi_of_state(const spin::DickeSpace& space,
                    const Eigen::VectorXcd& state) {
  const auto& m = space.basis_labels();
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < space.dim(); ++i) {
    const double p = std::norm(state[i]);
    mean += m[i] * p;
    second += m[i] * m[i] * p;
  }
  return 4.0 * (second - mean * mean);
}

Eigen::MatrixXcd full_unitary(const spin::DickeSpace& space, double phi,
                              const CircuitParams& params) {
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(space.dim(), space.dim());
  for (const GateSpec& g : ramsey_sequence(params)) {
    const double angle = g.role == ParamRole::Phase ? phi : g.angle;
    const Eigen::MatrixXcd gate = g.squared
                                      ? space.twisting(g.axis, angle).matrix
                                      : space.rotation(g.axis, angle).matrix;
    u = gate * u;
  }
  return u;
}

ProbabilityVector probabilities(const spin::DickeSpace& space, double phi,
                                const CircuitParams& params) {
  return CircuitCache(space, params).probabilities(phi);
}

ProbabilityJacobian probability_jacobian(const spin::DickeSpace& space,
                                         double phi,
                                         const CircuitParams& params) {
  return CircuitCache(space, params).jacobian(phi);
}

double qfi(const spin::DickeSpace& space, const CircuitParams& params) {
  return CircuitCache(space, params).qfi();
}

ProbabilityVector sample(const ProbabilityVector& exact, long long shots,
                         std::uint64_t seed) {
  if (shots <= 0) throw std::invalid_argument("shot count must be positive");
  const int d = static_cast<int>(exact.values.size());
  std::mt19937_64 rng(seed);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(d);
  long long remaining = shots;
  double mass_left = 1.0;
  for (int i = 0; i < d - 1 && remaining > 0; ++i) {
    const double p = std::clamp(exact.values[i] / mass_left, 0.0, 1.0);
    std::binomial_distribution<long long> binom(remaining, p);
    const long long n = binom(rng);
    counts[i] = static_cast<double>(n);
    remaining -= n;
    mass_left = std::max(mass_left - exact.values[i], 1e-300);
  }
  counts[d - 1] = static_cast<double>(remaining);
  ProbabilityVector out;
  out.values = counts / static_cast<double>(shots);
  out.kind = ProbabilityVector::Kind::Empirical;
  out.shots = shots;
  return out;
}

}  // namespace vqphase::interferometer
