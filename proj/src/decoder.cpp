#include "vqphase/decoder.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace vqphase::decoder {

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::Softsign: return "softsign";
    case Activation::Tanh: return "tanh";
    case Activation::Arctan: return "arctan";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Elu: return "elu";
    case Activation::SoftsignShift: return "softsign_shift";
    case Activation::Identity: return "identity";
  }
  throw std::invalid_argument("unknown activation");
}

Activation activation_from_name(std::string_view name) {
  for (Activation kind :
       {Activation::Softsign, Activation::Tanh, Activation::Arctan,
        Activation::Sigmoid, Activation::Elu, Activation::SoftsignShift,
        Activation::Identity})
    if (name == activation_name(kind)) return kind;
  throw std::invalid_argument("unknown activation name: " + std::string(name));
}

Parity activation_parity(Activation kind) {
  switch (kind) {
    case Activation::Softsign:
    case Activation::Tanh:
    case Activation::Arctan:
    case Activation::Identity:
      return Parity::Odd;
    case Activation::Sigmoid:
    case Activation::Elu:
    case Activation::SoftsignShift:
      return Parity::Asymmetric;
  }
  throw std::invalid_argument("unknown activation");
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::Softsign: return x / (1.0 + std::abs(x));
    case Activation::Tanh: return std::tanh(x);
    case Activation::Arctan: return std::atan(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Elu: return x > 0.0 ? x : std::expm1(x);
    case Activation::SoftsignShift: return x / (1.0 + std::abs(x)) + 1.0;
    case Activation::Identity: return x;
  }
  throw std::invalid_argument("unknown activation");
}

double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::Softsign:
    case Activation::SoftsignShift: {
      const double d = 1.0 + std::abs(x);
      return 1.0 / (d * d);
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Arctan: return 1.0 / (1.0 + x * x);
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Activation::Elu: return x > 0.0 ? 1.0 : std::exp(x);
    case Activation::Identity: return 1.0;
  }
  throw std::invalid_argument("unknown activation");
}

double phase_estimate(double s, double c) {
  if (s == 0.0 && c == 0.0) return 0.0;
  const double v = std::atan2(s, c);
  return v == std::numbers::pi ? -std::numbers::pi : v;
}

Decoder::Decoder(int input_width, std::vector<int> hidden,
                 Activation activation)
    : activation_(activation) {
  if (input_width < 1) throw std::invalid_argument("input width must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("need at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden width must be >= 1");
  sizes_.push_back(input_width);
  sizes_.insert(sizes_.end(), hidden.begin(), hidden.end());
  sizes_.push_back(2);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights_.emplace_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
    biases_.emplace_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
}

void Decoder::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double r = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
    std::uniform_real_distribution<double> u(-r, r);
    double* data = weights_[l].data();
    for (Eigen::Index i = 0; i < weights_[l].size(); ++i) data[i] = u(rng);
    biases_[l].setZero();
  }
}

int Decoder::param_count() const {
  int n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<int>(weights_[l].size() + biases_[l].size());
  return n;
}

Eigen::VectorXd Decoder::params() const {
  Eigen::VectorXd flat(param_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.segment(k, weights_[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), weights_[l].size());
    k += weights_[l].size();
    flat.segment(k, biases_[l].size()) = biases_[l];
    k += biases_[l].size();
  }
  return flat;
}

void Decoder::set_params(const Eigen::VectorXd& flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("parameter vector has wrong length");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Eigen::VectorXd>(weights_[l].data(), weights_[l].size()) =
        flat.segment(k, weights_[l].size());
    k += weights_[l].size();
    biases_[l] = flat.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
}

Eigen::MatrixXd Decoder::forward(const Eigen::MatrixXd& inputs,
                                 ForwardTrace* trace) const {
  if (inputs.rows() != input_width())
    throw std::invalid_argument("input has wrong width");
  if (trace) {
    trace->input = inputs;
    trace->pre.clear();
    trace->post.clear();
  }
  Eigen::MatrixXd a = inputs;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
    if (l < last)
      a = z.unaryExpr([this](double x) { return activate(activation_, x); });
    else
      a = z;
    if (trace) {
      trace->pre.push_back(std::move(z));
      trace->post.push_back(a);
    }
  }
  return a;
}

Eigen::MatrixXd Decoder::latent(const Eigen::MatrixXd& inputs) const {
  ForwardTrace trace;
  forward(inputs, &trace);
  return trace.post[trace.post.size() - 2];
}

Eigen::VectorXd Decoder::phase_estimates(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd out = forward(inputs);
  Eigen::VectorXd phases(out.cols());
  for (Eigen::Index i = 0; i < out.cols(); ++i)
    phases[i] = phase_estimate(out(0, i), out(1, i));
  return phases;
}

Eigen::VectorXd Decoder::backward(const ForwardTrace& trace,
                                  const Eigen::MatrixXd& upstream,
                                  Eigen::MatrixXd* grad_input) const {
  const std::size_t layers = weights_.size();
  if (trace.pre.size() != layers)
    throw std::invalid_argument("trace does not match this decoder");
  std::vector<Eigen::MatrixXd> dw(layers);
  std::vector<Eigen::VectorXd> db(layers);

  Eigen::MatrixXd delta = upstream;  // final layer is affine
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& below =
        l == 0 ? trace.input : trace.post[l - 1];
    dw[l] = delta * below.transpose();
    db[l] = delta.rowwise().sum();
    if (l == 0) {
      if (grad_input) *grad_input = weights_[0].transpose() * delta;
      break;
    }
    delta = (weights_[l].transpose() * delta)
                .cwiseProduct(trace.pre[l - 1].unaryExpr([this](double x) {
                  return activate_derivative(activation_, x);
                }));
  }

  Eigen::VectorXd flat(param_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    flat.segment(k, dw[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(dw[l].data(), dw[l].size());
    k += dw[l].size();
    flat.segment(k, db[l].size()) = db[l];
    k += db[l].size();
  }
  return flat;
}

}  // namespace vqphase::decoder
