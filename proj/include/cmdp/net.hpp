#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

// Fully connected network, tanh on hidden layers, linear output. Parameters
// live in one flat vector laid out [W0, b0, W1, b1, ...] with weights
// row-major (one row per output unit), so optimizers and checkpoints can
// treat the whole net as a single array.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ContractViolation("network needs input and output sizes");
    params_.resize(param_count(sizes_));
    std::size_t at = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      int in = sizes_[l];
      int out = sizes_[l + 1];
      double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (int i = 0; i < out * (in + 1); ++i) params_[at++] = rng.uniform(-bound, bound);
    }
  }

  static std::size_t param_count(const std::vector<int>& sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      n += static_cast<std::size_t>(sizes[l + 1]) * (sizes[l] + 1);
    return n;
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }

  void set_shape(std::vector<int> sizes, std::vector<double> params) {
    if (params.size() != param_count(sizes)) throw ValidationError("parameter count mismatch");
    sizes_ = std::move(sizes);
    params_ = std::move(params);
  }

  // Per-layer activations recorded by a training-mode forward pass;
  // activations[0] is the input, activations.back() the linear output.
  struct Trace {
    std::vector<std::vector<double>> activations;
  };

  std::vector<double> forward(const std::vector<double>& input, Trace* trace = nullptr) const {
    if (static_cast<int>(input.size()) != input_size())
      throw ContractViolation("network input size mismatch");
    if (trace) {
      trace->activations.clear();
      trace->activations.push_back(input);
    }
    std::vector<double> a = input;
    std::size_t at = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      int in = sizes_[l];
      int out = sizes_[l + 1];
      std::vector<double> z(out);
      for (int i = 0; i < out; ++i) {
        double acc = 0.0;
        const double* row = params_.data() + at + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) acc += row[j] * a[j];
        z[i] = acc + params_[at + static_cast<std::size_t>(out) * in + i];
      }
      at += static_cast<std::size_t>(out) * (in + 1);
      bool hidden = l + 2 < sizes_.size();
      if (hidden)
        for (double& v : z) v = std::tanh(v);
      a = std::move(z);
      if (trace) trace->activations.push_back(a);
    }
    return a;
  }

  // Accumulates dLoss/dparams into grad given dLoss/doutput; grad must be
  // param-sized. Returns nothing the callers need beyond the accumulation.
  void backward(const Trace& trace, const std::vector<double>& dLdy,
                std::vector<double>& grad) const {
    if (grad.size() != params_.size()) throw ContractViolation("gradient buffer size mismatch");
    if (trace.activations.size() != sizes_.size())
      throw ContractViolation("trace does not match network depth");

    std::vector<double> delta = dLdy;  // dL/dz for the layer being processed
    std::size_t layers = sizes_.size() - 1;
    std::vector<std::size_t> offsets(layers);
    std::size_t at = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      offsets[l] = at;
      at += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }

    for (std::size_t l = layers; l-- > 0;) {
      int in = sizes_[l];
      int out = sizes_[l + 1];
      const std::vector<double>& a_in = trace.activations[l];
      if (l + 1 < layers) {  // hidden layer output passed through tanh
        const std::vector<double>& a_out = trace.activations[l + 1];
        for (int i = 0; i < out; ++i) delta[i] *= 1.0 - a_out[i] * a_out[i];
      }
      std::size_t base = offsets[l];
      for (int i = 0; i < out; ++i) {
        double* row = grad.data() + base + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) row[j] += delta[i] * a_in[j];
        grad[base + static_cast<std::size_t>(out) * in + i] += delta[i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (int i = 0; i < out; ++i) {
        const double* row = params_.data() + base + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) prev[j] += row[j] * delta[i];
      }
      delta = std::move(prev);
    }
  }

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}

  bool operator==(const AdamState&) const = default;
};

// One Adam update over a flat parameter block; grad is consumed as-is
// (callers average over their minibatch beforehand).
inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw ContractViolation("optimizer size mismatch");
  ++state.step;
  double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / b1t;
    double vhat = state.v[i] / b2t;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

}  // namespace cmdp
