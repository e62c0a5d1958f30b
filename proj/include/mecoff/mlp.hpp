#pragma once

// One-hidden-layer tanh network with a linear output layer, hand-written
// backpropagation and an Adam optimizer. Batched routines take one sample per
// column.

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mecoff/errors.hpp"
#include "mecoff/random.hpp"

namespace mecoff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Weights and biases of an in -> hidden -> out network. Also used for
/// gradients and Adam moments, which share the same shapes.
struct MlpParams {
  Matrix w1;  // hidden x in
  Vector b1;  // hidden
  Matrix w2;  // out x hidden
  Vector b2;  // out

  MlpParams() = default;
  MlpParams(int in, int hidden, int out)
      : w1(Matrix::Zero(hidden, in)),
        b1(Vector::Zero(hidden)),
        w2(Matrix::Zero(out, hidden)),
        b2(Vector::Zero(out)) {}

  int inputs() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int outputs() const { return static_cast<int>(w2.rows()); }

  MlpParams zeros_like() const { return MlpParams(inputs(), hidden(), outputs()); }

  bool same_shape(const MlpParams& o) const {
    return inputs() == o.inputs() && hidden() == o.hidden() && outputs() == o.outputs();
  }

  std::size_t size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  /// Visits every scalar parameter in a fixed order (w1, b1, w2, b2; column-major).
  template <typename F>
  void for_each(F&& f) {
    for (Eigen::Index i = 0; i < w1.size(); ++i) f(w1.data()[i]);
    for (Eigen::Index i = 0; i < b1.size(); ++i) f(b1.data()[i]);
    for (Eigen::Index i = 0; i < w2.size(); ++i) f(w2.data()[i]);
    for (Eigen::Index i = 0; i < b2.size(); ++i) f(b2.data()[i]);
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for each layer's weights and biases.
inline MlpParams mlp_init(int in, int hidden, int out, Rng& rng) {
  if (in < 1 || hidden < 1 || out < 1) throw ContractViolation("layer sizes must be positive");
  MlpParams p(in, hidden, out);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = uniform(rng, -r1, r1);
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1.data()[i] = uniform(rng, -r1, r1);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = uniform(rng, -r2, r2);
  for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2.data()[i] = uniform(rng, -r2, r2);
  return p;
}

namespace detail {

// tanh through the vectorized exp: tanh(x) = sign(x) (1 - e^{-2|x|}) / (1 + e^{-2|x|}).
inline void tanh_inplace(Matrix& m) {
  auto a = m.array();
  const Eigen::ArrayXXd e = (-2.0 * a.abs()).exp();
  a = a.sign() * (1.0 - e) / (1.0 + e);
}

inline void check_input(const MlpParams& p, Eigen::Index rows) {
  if (rows != p.w1.cols()) {
    throw ContractViolation("input length " + std::to_string(rows) + " does not match network input " +
                            std::to_string(p.w1.cols()));
  }
}

}  // namespace detail

/// Hidden activations for a batch (hidden x n).
inline Matrix mlp_hidden(const MlpParams& p, const Matrix& inputs) {
  detail::check_input(p, inputs.rows());
  Matrix h = p.w1 * inputs;
  h.colwise() += p.b1;
  detail::tanh_inplace(h);
  return h;
}

/// Outputs for a batch (out x n).
inline Matrix mlp_forward_batch(const MlpParams& p, const Matrix& inputs) {
  Matrix out = p.w2 * mlp_hidden(p, inputs);
  out.colwise() += p.b2;
  return out;
}

inline Vector mlp_forward(const MlpParams& p, std::span<const double> input) {
  detail::check_input(p, static_cast<Eigen::Index>(input.size()));
  const Eigen::Map<const Matrix> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  return mlp_forward_batch(p, x).col(0);
}

/// Gradient of sum_i <signal_i, out(x_i)> over the batch columns, i.e. the
/// vector-Jacobian product with a per-output error signal.
inline MlpParams mlp_gradient_batch(const MlpParams& p, const Matrix& inputs, const Matrix& signal) {
  if (signal.rows() != p.w2.rows() || signal.cols() != inputs.cols()) {
    throw ContractViolation("error signal shape does not match network outputs");
  }
  const Matrix h = mlp_hidden(p, inputs);
  MlpParams g;
  g.w2 = signal * h.transpose();
  g.b2 = signal.rowwise().sum();
  const Matrix dh = ((p.w2.transpose() * signal).array() * (1.0 - h.array().square())).matrix();
  g.w1 = dh * inputs.transpose();
  g.b1 = dh.rowwise().sum();
  return g;
}

inline MlpParams mlp_gradient(const MlpParams& p, std::span<const double> input,
                              std::span<const double> signal) {
  detail::check_input(p, static_cast<Eigen::Index>(input.size()));
  const Eigen::Map<const Matrix> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const Eigen::Map<const Matrix> s(signal.data(), static_cast<Eigen::Index>(signal.size()), 1);
  return mlp_gradient_batch(p, x, s);
}

/// Gradient when each column's signal is nonzero only at one output slot:
/// column i contributes `error[i]` at output `slot[i]`. Avoids the dense
/// output-layer products the general routine needs.
inline MlpParams mlp_gradient_sparse(const MlpParams& p, const Matrix& inputs, const Matrix& hidden,
                                     std::span<const int> slot, std::span<const double> error) {
  const auto n = inputs.cols();
  if (static_cast<Eigen::Index>(slot.size()) != n || static_cast<Eigen::Index>(error.size()) != n) {
    throw ContractViolation("one slot and one error per sample required");
  }
  MlpParams g = p.zeros_like();
  Matrix dh(p.hidden(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = slot[i];
    if (a < 0 || a >= p.outputs()) throw ContractViolation("output slot out of range");
    g.w2.row(a).noalias() += error[i] * hidden.col(i).transpose();
    g.b2[a] += error[i];
    dh.col(i) = (error[i] * p.w2.row(a).transpose()).array() * (1.0 - hidden.col(i).array().square());
  }
  g.w1.noalias() = dh * inputs.transpose();
  g.b1 = dh.rowwise().sum();
  return g;
}

struct AdamHyper {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  long long steps = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(const MlpParams& like, AdamHyper h) : m(like.zeros_like()), v(like.zeros_like()), hyper(h) {}
};

/// One bias-corrected Adam step that descends along `grad`.
inline void adam_step(MlpParams& params, AdamState& state, const MlpParams& grad) {
  if (!params.same_shape(grad) || !params.same_shape(state.m)) {
    throw ContractViolation("Adam shapes do not match parameters");
  }
  ++state.steps;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.steps));
  auto update = [&](auto& theta, auto& m, auto& v, const auto& g) {
    m.array() = h.beta1 * m.array() + (1.0 - h.beta1) * g.array();
    v.array() = h.beta2 * v.array() + (1.0 - h.beta2) * g.array().square();
    theta.array() -= h.step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
  };
  update(params.w1, state.m.w1, state.v.w1, grad.w1);
  update(params.b1, state.m.b1, state.v.b1, grad.b1);
  update(params.w2, state.m.w2, state.v.w2, grad.w2);
  update(params.b2, state.m.b2, state.v.b2, grad.b2);
}

// Checkpoints: {"shape": [in, hidden, out], "w1": [...], ...}, column-major data.

inline nlohmann::json to_json(const MlpParams& p) {
  auto flat = [](const auto& m) { return std::vector<double>(m.data(), m.data() + m.size()); };
  return {{"shape", {p.inputs(), p.hidden(), p.outputs()}},
          {"w1", flat(p.w1)},
          {"b1", flat(p.b1)},
          {"w2", flat(p.w2)},
          {"b2", flat(p.b2)}};
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() != 3) throw ConfigError("checkpoint shape must have three entries");
  MlpParams p(shape[0], shape[1], shape[2]);
  auto fill = [&](const char* key, auto& m) {
    const auto data = j.at(key).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != m.size()) {
      throw ConfigError(std::string("checkpoint field '") + key + "' has wrong length");
    }
    std::copy(data.begin(), data.end(), m.data());
  };
  fill("w1", p.w1);
  fill("b1", p.b1);
  fill("w2", p.w2);
  fill("b2", p.b2);
  return p;
}

inline nlohmann::json to_json(const AdamState& s) {
  return {{"m", to_json(s.m)},
          {"v", to_json(s.v)},
          {"steps", s.steps},
          {"step_size", s.hyper.step_size},
          {"beta1", s.hyper.beta1},
          {"beta2", s.hyper.beta2},
          {"epsilon", s.hyper.epsilon}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.m = mlp_from_json(j.at("m"));
  s.v = mlp_from_json(j.at("v"));
  s.steps = j.at("steps").get<long long>();
  s.hyper = {j.at("step_size").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
             j.at("epsilon").get<double>()};
  return s;
}

}  // namespace mecoff
