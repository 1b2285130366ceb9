#pragma once

// Baseline random initializers. Both are deterministic for a given seed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "compnet/dense_net.hpp"

namespace compnet {

using Initializer =
    std::function<DenseNet(std::span<const std::size_t> widths, std::uint64_t seed)>;

/// Default linear-layer scheme: weights and biases uniform on
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline DenseNet init_kaiming(std::span<const std::size_t> widths,
                             std::uint64_t seed) {
  DenseNet net(std::vector<std::size_t>(widths.begin(), widths.end()));
  std::mt19937_64 rng(seed);
  for (auto& l : net.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : l.w) w = u(rng);
    for (auto& b : l.b) b = u(rng);
  }
  return net;
}

/// Randomized asymmetric initialization. For every neuron the row
/// (weights, bias) gets one uniformly chosen coordinate drawn from the
/// positive Beta(2,1) distribution; the others are N(0, sigma^2) with sigma^2
/// picked so the expected squared row norm is 2, as in He initialization.
inline DenseNet init_raai(std::span<const std::size_t> widths,
                          std::uint64_t seed) {
  DenseNet net(std::vector<std::size_t>(widths.begin(), widths.end()));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kBetaSecondMoment = 0.5;  // E[xi^2], xi ~ Beta(2,1)
  for (auto& l : net.layers()) {
    const double sigma =
        std::sqrt((2.0 - kBetaSecondMoment) / static_cast<double>(l.in));
    std::normal_distribution<double> normal(0.0, sigma);
    std::uniform_int_distribution<std::size_t> pick(0, l.in);
    for (std::size_t r = 0; r < l.out; ++r) {
      const std::size_t special = pick(rng);
      for (std::size_t c = 0; c <= l.in; ++c) {
        // Beta(2,1) by inverse CDF: F(x) = x^2.
        const double v = c == special ? std::sqrt(unit(rng)) : normal(rng);
        if (c < l.in) {
          l.weight(r, c) = v;
        } else {
          l.b[r] = v;
        }
      }
    }
  }
  return net;
}

/// Widths [1, width x hidden, 1].
inline std::vector<std::size_t> uniform_widths(std::size_t hidden,
                                               std::size_t width = 4) {
  std::vector<std::size_t> w{1};
  for (std::size_t k = 0; k < hidden; ++k) w.push_back(width);
  w.push_back(1);
  return w;
}

}  // namespace compnet
