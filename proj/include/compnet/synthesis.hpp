#pragma once

// Weight synthesis for compositional networks.
//
// Every hidden layer has four neurons:
//   0  t1   sigma_i * W_{i-1}(x)            (W_{-1}(x) = x)
//   1  t2   sigma_i * relu(W_{i-1}(x) - a_i)
//   2  acc  base(x) + sum_{n<i} s_n W_n(x)  base = x (add) or 1 - x (subtract)
//   3  c    sigma_i                          constant carrier
// so that u_i = t1/a_i - (1/a_i + 1/(1-a_i)) t2 = sigma_i W_i(x). Consumers of
// t1/t2 always read them through u_i, i.e. in the fixed proportion
// 1/a_i : -(1/a_i + 1/(1-a_i)). The amplitude sigma_i shrinks by
// d_i = s_i / s_{i-1} per layer, which keeps the weights into acc at
// s_i / sigma_i = O(1). The carrier feeds itself with weight d_i and stands in
// for the biases of t2 in every layer after the first.
//
// The output neuron reads acc + s_{L-1} W_{L-1} and, in subtract mode, flips
// it around the constant 1, giving x - sum s_n W_n. Every hidden
// pre-activation except t2 is non-negative, so the ReLUs only ever act on t2.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "compnet/dense_net.hpp"
#include "compnet/dual.hpp"
#include "compnet/manifold.hpp"
#include "compnet/pwl.hpp"

namespace compnet {

inline constexpr std::size_t kCompositionalWidth = 4;

namespace neuron {
inline constexpr std::size_t kT1 = 0;
inline constexpr std::size_t kT2 = 1;
inline constexpr std::size_t kAcc = 2;
inline constexpr std::size_t kCarrier = 3;
}  // namespace neuron

/// Weights and biases over an arbitrary scalar type, laid out like Layer.
template <class T>
struct SynthLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<T> w;
  std::vector<T> b;

  SynthLayer(std::size_t in_, std::size_t out_)
      : in(in_), out(out_), w(in_ * out_, T(0.0)), b(out_, T(0.0)) {}
  T& at(std::size_t row, std::size_t col) { return w[row * in + col]; }
};

/// Raw synthesis; no validation, no oracle check. Generic so dual numbers
/// can flow from (peaks, scales) into every weight.
template <class T>
std::vector<SynthLayer<T>> synthesize_layers(std::span<const T> peaks,
                                             std::span<const T> scales,
                                             Mode mode) {
  using std::size_t;
  const size_t depth = peaks.size();
  const T one(1.0);
  std::vector<SynthLayer<T>> layers;
  layers.reserve(depth + 1);

  auto wave_coeffs = [&](size_t i) {
    const T up = one / peaks[i];
    const T down = -(up + one / (one - peaks[i]));
    return std::pair<T, T>{up, down};
  };

  // First hidden layer reads x directly and uses ordinary biases.
  {
    SynthLayer<T> l(1, kCompositionalWidth);
    l.at(neuron::kT1, 0) = one;
    l.at(neuron::kT2, 0) = one;
    l.b[neuron::kT2] = -peaks[0];
    if (mode == Mode::Add) {
      l.at(neuron::kAcc, 0) = one;
    } else {
      l.at(neuron::kAcc, 0) = -one;
      l.b[neuron::kAcc] = one;
    }
    l.b[neuron::kCarrier] = one;
    layers.push_back(std::move(l));
  }

  T sigma = one;
  for (size_t i = 0; i + 1 < depth; ++i) {
    T decay = one;
    if (value_of(scales[i]) > 0.0 && value_of(scales[i + 1]) > 0.0) {
      decay = scales[i + 1] / scales[i];
    }
    const T acc_gain = scales[i] / sigma;
    const auto [up, down] = wave_coeffs(i);

    SynthLayer<T> l(kCompositionalWidth, kCompositionalWidth);
    l.at(neuron::kT1, neuron::kT1) = decay * up;
    l.at(neuron::kT1, neuron::kT2) = decay * down;
    l.at(neuron::kT2, neuron::kT1) = decay * up;
    l.at(neuron::kT2, neuron::kT2) = decay * down;
    l.at(neuron::kT2, neuron::kCarrier) = -(peaks[i + 1] * decay);
    l.at(neuron::kAcc, neuron::kT1) = acc_gain * up;
    l.at(neuron::kAcc, neuron::kT2) = acc_gain * down;
    l.at(neuron::kAcc, neuron::kAcc) = one;
    l.at(neuron::kCarrier, neuron::kCarrier) = decay;
    layers.push_back(std::move(l));
    sigma = sigma * decay;
  }

  {
    const size_t last = depth - 1;
    const T acc_gain = scales[last] / sigma;
    const auto [up, down] = wave_coeffs(last);
    const T sign(mode == Mode::Add ? 1.0 : -1.0);
    SynthLayer<T> l(kCompositionalWidth, 1);
    l.at(0, neuron::kT1) = sign * acc_gain * up;
    l.at(0, neuron::kT2) = sign * acc_gain * down;
    l.at(0, neuron::kAcc) = sign;
    if (mode == Mode::Subtract) l.b[0] = one;
    layers.push_back(std::move(l));
  }
  return layers;
}

template <class T>
DenseNet to_dense_net(const std::vector<SynthLayer<T>>& synth) {
  std::vector<std::size_t> widths{synth.front().in};
  std::vector<Layer> layers;
  for (const auto& s : synth) {
    widths.push_back(s.out);
    Layer l{s.in, s.out, std::vector<double>(s.w.size()),
            std::vector<double>(s.b.size())};
    for (std::size_t k = 0; k < s.w.size(); ++k) l.w[k] = value_of(s.w[k]);
    for (std::size_t k = 0; k < s.b.size(); ++k) l.b[k] = value_of(s.b[k]);
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(widths), std::move(layers));
}

inline constexpr double kSynthesisCheckTol = 1e-9;
inline constexpr std::size_t kSynthesisCheckPoints = 101;

/// Synthesizes the [1, 4 x L, 1] network realising ideal_function(p) and
/// checks it against the exact oracle on a 101-point grid.
inline DenseNet synthesize_compositional(const ManifoldParams& p) {
  p.validate();
  auto net = to_dense_net(synthesize_layers<double>(p.peaks, p.scales, p.mode));
  const auto oracle = ideal_function(p);
  for (double x : uniform_grid(kSynthesisCheckPoints)) {
    const double diff = std::abs(net(x) - oracle(x));
    if (!(diff <= kSynthesisCheckTol)) {
      throw std::logic_error("synthesize_compositional: network disagrees with "
                             "ideal function at x=" + std::to_string(x));
    }
  }
  return net;
}

}  // namespace compnet
