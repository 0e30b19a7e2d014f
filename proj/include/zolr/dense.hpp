#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "zolr/common.hpp"

namespace zolr {

// Fully connected layer y = W x + b, W stored row-major (out x in).
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  Vec weight;
  Vec bias;

  Dense() = default;
  Dense(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  void forward(std::span<const double> x, std::span<double> y) const {
    const double* w = weight.data();
    for (std::size_t o = 0; o < out; ++o, w += in) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }

  // Accumulates dL/dW and dL/db into `grad` and, when `dx` is non-empty,
  // overwrites it with dL/dx.
  void backward(std::span<const double> x, std::span<const double> dy, Dense& grad,
                std::span<double> dx) const {
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dy[o];
      if (g == 0.0) continue;
      grad.bias[o] += g;
      double* gw = grad.weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gw[i] += g * x[i];
    }
    if (dx.empty()) return;
    for (std::size_t i = 0; i < in; ++i) dx[i] = 0.0;
    const double* w = weight.data();
    for (std::size_t o = 0; o < out; ++o, w += in) {
      const double g = dy[o];
      if (g == 0.0) continue;
      for (std::size_t i = 0; i < in; ++i) dx[i] += g * w[i];
    }
  }

  bool operator==(const Dense&) const = default;
};

inline Dense zeros_like(const Dense& d) { return Dense(d.in, d.out); }

// Weights ~ N(0, 1/fan_in), biases zero.
inline Dense init_dense(std::size_t in, std::size_t out, Rng& rng) {
  Dense d(in, out);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  for (auto& w : d.weight) w = dist(rng);
  return d;
}

// Activations recorded during an MLP forward pass. acts[0] is the input,
// acts[i] the output of layer i-1 (tanh applied on all but the last layer).
struct MlpTape {
  std::vector<Vec> acts;
};

inline void mlp_forward(const std::vector<Dense>& layers, std::span<const double> x,
                        MlpTape& tape) {
  tape.acts.resize(layers.size() + 1);
  tape.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& y = tape.acts[l + 1];
    y.resize(layers[l].out);
    layers[l].forward(tape.acts[l], y);
    if (l + 1 < layers.size())
      for (auto& v : y) v = std::tanh(v);
  }
}

// Backpropagates dL/d(output) through the tape. `dinput` receives dL/dx when
// non-null.
inline void mlp_backward(const std::vector<Dense>& layers, const MlpTape& tape,
                         std::span<const double> dout, std::vector<Dense>& grads,
                         Vec* dinput) {
  Vec dy(dout.begin(), dout.end());
  Vec dx;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      const auto& y = tape.acts[l + 1];
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= 1.0 - y[i] * y[i];
    }
    const bool need_dx = l > 0 || dinput != nullptr;
    dx.assign(need_dx ? layers[l].in : 0, 0.0);
    layers[l].backward(tape.acts[l], dy, grads[l], dx);
    dy.swap(dx);
  }
  if (dinput) *dinput = std::move(dy);
}

inline std::size_t parameter_count(const std::vector<Dense>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

inline void append_params(const std::vector<Dense>& layers, Vec& out) {
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.begin(), l.weight.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
}

// Reads parameters back in the order written by append_params. Returns the
// number of values consumed.
inline std::size_t assign_params(std::vector<Dense>& layers, std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto& l : layers) {
    std::copy_n(flat.begin() + pos, l.weight.size(), l.weight.begin());
    pos += l.weight.size();
    std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
  return pos;
}

}  // namespace zolr
