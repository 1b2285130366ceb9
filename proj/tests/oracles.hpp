#pragma once

// Test-only reference computations. Nothing here goes through the PWL algebra
// or the network code it is used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace compnet::oracle {

inline double triangle(double a, double x) {
  return x <= a ? x / a : 1.0 - (x - a) / (1.0 - a);
}

/// W_i(x) by nested scalar evaluation.
inline double wave(std::span<const double> peaks, std::size_t i, double x) {
  double y = x;
  for (std::size_t k = 0; k <= i; ++k) y = triangle(peaks[k], y);
  return y;
}

/// x (+/-) sum s_n W_n(x) by nested scalar evaluation.
inline double ideal(std::span<const double> peaks, std::span<const double> scales,
                    bool add, double x) {
  double y = x;
  double w = x;
  for (std::size_t n = 0; n < peaks.size(); ++n) {
    w = triangle(peaks[n], w);
    y += (add ? 1.0 : -1.0) * scales[n] * w;
  }
  return y;
}

/// Linear pieces of f on a uniform grid, counted from slope changes between
/// consecutive grid cells. Only exact when every bend is separated by more
/// than a couple of cells; intended for moderate depths.
inline std::size_t grid_segment_count(const std::function<double(double)>& f,
                                      std::size_t cells, double rel_tol = 1e-6) {
  const double h = 1.0 / static_cast<double>(cells);
  std::vector<double> slopes(cells);
  double prev = f(0.0);
  for (std::size_t k = 0; k < cells; ++k) {
    const double next = f(static_cast<double>(k + 1) * h);
    slopes[k] = (next - prev) / h;
    prev = next;
  }
  // A bend strictly inside a cell makes that cell's slope an average of its
  // two neighbours; such cells are skipped rather than counted twice.
  std::size_t count = 1;
  std::size_t k = 1;
  while (k < cells) {
    const double scale = std::max({std::abs(slopes[k]), std::abs(slopes[k - 1]), 1.0});
    if (std::abs(slopes[k] - slopes[k - 1]) > rel_tol * scale) {
      ++count;
      if (k + 1 < cells) {
        const double s2 = std::max({std::abs(slopes[k + 1]), std::abs(slopes[k]), 1.0});
        if (std::abs(slopes[k + 1] - slopes[k]) > rel_tol * s2) ++k;
      }
    }
    ++k;
  }
  return count;
}

inline double central_difference(const std::function<double(double)>& f, double x,
                                 double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace compnet::oracle
