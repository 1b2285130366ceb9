#pragma once

// Training-manifold coordinates for compositional networks: triangle peaks
// a_i, wave scales s_i and the add/subtract combination mode, together with
// the scale recurrence that keeps the infinite-depth output C^1 and the
// numerical diagnostics built on the exact PWL representation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "compnet/pwl.hpp"

namespace compnet {

enum class Mode { Add, Subtract };

inline constexpr double kPeakEpsilon = 1e-3;
inline constexpr double kDefaultTailPeak = 0.5;

inline std::string_view to_string(Mode m) {
  return m == Mode::Add ? "add" : "subtract";
}

inline Mode mode_from_string(std::string_view s) {
  if (s == "add") return Mode::Add;
  if (s == "subtract") return Mode::Subtract;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

struct ManifoldParams {
  std::vector<double> peaks;
  std::vector<double> scales;
  Mode mode = Mode::Subtract;

  std::size_t depth() const { return peaks.size(); }

  void validate() const {
    if (peaks.empty()) throw std::invalid_argument("ManifoldParams: depth 0");
    if (peaks.size() != scales.size()) {
      throw std::invalid_argument("ManifoldParams: peaks/scales length mismatch");
    }
    for (double a : peaks) {
      if (!(a >= kPeakEpsilon - 1e-15 && a <= 1.0 - kPeakEpsilon + 1e-15)) {
        throw std::domain_error("ManifoldParams: peak outside [eps, 1-eps]");
      }
    }
    for (double s : scales) {
      if (!std::isfinite(s) || s < 0.0) {
        throw std::domain_error("ManifoldParams: scale not finite and >= 0");
      }
    }
  }

  friend bool operator==(const ManifoldParams&, const ManifoldParams&) = default;
};

inline void check_peak_bounds(std::span<const double> peaks) {
  for (double a : peaks) {
    if (!(a >= kPeakEpsilon - 1e-15 && a <= 1.0 - kPeakEpsilon + 1e-15)) {
      throw std::domain_error("peak outside [eps, 1-eps]");
    }
  }
}

/// Scales satisfying s_{i+1} = s_i (1 - a_{i+1}) a_{i+2}. The first scale is
/// base (1 - a_0) a_1 when adding waves and base a_0 a_1 when subtracting
/// them; peaks past the end of the list read as tail_peak.
///
/// Generic over the scalar so forward-mode duals can flow through it.
template <class T>
std::vector<T> derive_scales_t(std::span<const T> peaks, Mode mode, T base,
                               double tail_peak = kDefaultTailPeak) {
  const std::size_t depth = peaks.size();
  if (depth < 2) throw std::invalid_argument("derive_scales needs >= 2 peaks");
  auto peak = [&](std::size_t k) -> T {
    return k < depth ? peaks[k] : T(tail_peak);
  };
  std::vector<T> s;
  s.reserve(depth);
  const T one(1.0);
  s.push_back(mode == Mode::Add ? base * (one - peak(0)) * peak(1)
                                : base * peak(0) * peak(1));
  for (std::size_t i = 0; i + 1 < depth; ++i) {
    s.push_back(s[i] * (one - peak(i + 1)) * peak(i + 2));
  }
  return s;
}

inline std::vector<double> derive_scales(std::span<const double> peaks,
                                         Mode mode, double base_scale = 1.0,
                                         double tail_peak = kDefaultTailPeak) {
  if (peaks.size() < 2) {
    throw std::invalid_argument("derive_scales needs >= 2 peaks");
  }
  check_peak_bounds(peaks);
  if (!(base_scale > 0.0)) {
    throw std::domain_error("derive_scales base_scale must be positive");
  }
  return derive_scales_t<double>(peaks, mode, base_scale, tail_peak);
}

/// ManifoldParams with scales from derive_scales.
inline ManifoldParams on_manifold(std::vector<double> peaks, Mode mode,
                                  double base_scale = 1.0,
                                  double tail_peak = kDefaultTailPeak) {
  auto scales = derive_scales(peaks, mode, base_scale, tail_peak);
  return {std::move(peaks), std::move(scales), mode};
}

/// W_0 .. W_{count-1}, where W_i = T_{a_i} o ... o T_{a_0}.
inline std::vector<PwlFunction> composed_waves(std::span<const double> peaks,
                                               std::size_t count) {
  if (count > peaks.size()) {
    throw std::invalid_argument("composed_waves: not enough peaks");
  }
  std::vector<PwlFunction> waves;
  waves.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    waves.push_back(i == 0 ? triangle(peaks[0])
                           : compose(triangle(peaks[i]), waves.back()));
  }
  return waves;
}

inline PwlFunction composed_wave(std::span<const double> peaks, std::size_t i) {
  return std::move(composed_waves(peaks, i + 1).back());
}

/// y = x (+/-) sum_{n < terms} s_n W_n, computed exactly.
inline PwlFunction partial_function(const ManifoldParams& p, std::size_t terms) {
  if (terms > p.depth()) {
    throw std::invalid_argument("partial_function: more terms than depth");
  }
  const PwlFunction line = PwlFunction::identity();
  if (terms == 0) return line;
  const auto waves = composed_waves(p.peaks, terms);
  const double sign = p.mode == Mode::Add ? 1.0 : -1.0;
  std::vector<Term> combo{{1.0, &line}};
  for (std::size_t n = 0; n < terms; ++n) {
    combo.push_back({sign * p.scales[n], &waves[n]});
  }
  return affine_combine(combo);
}

inline PwlFunction ideal_function(const ManifoldParams& p) {
  p.validate();
  return partial_function(p, p.depth());
}

/// Repeats a finite peak list cyclically out to `count` entries.
inline std::vector<double> periodic_peaks(std::span<const double> base,
                                          std::size_t count) {
  if (base.empty()) throw std::invalid_argument("periodic_peaks: empty base");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = base[k % base.size()];
  return out;
}

struct SeriesDiagnostics {
  std::size_t layer = 0;
  std::size_t truncation = 0;
  /// Residual after including terms i+1 .. i+1+k.
  std::vector<double> partial_sums;
  double residual = 0.0;
};

/// Truncated derivative-gap series at the peaks of W_i:
///   s_i - (s_{i+1} + sum_{n=i+2}^{N} s_n prod_{k=i+2}^{n} 1/a_k) / (1 - a_{i+1})
/// `peaks` and `scales` must cover indices 0..N.
inline SeriesDiagnostics error_series(std::span<const double> peaks,
                                      std::span<const double> scales,
                                      std::size_t i, std::size_t truncation) {
  const std::size_t n_max = truncation;
  if (n_max <= i + 2) {
    throw std::invalid_argument("error_series requires N > i + 2");
  }
  if (peaks.size() <= n_max || scales.size() <= n_max) {
    throw std::invalid_argument("error_series: sequences shorter than N + 1");
  }
  SeriesDiagnostics d;
  d.layer = i;
  d.truncation = n_max;
  const double inv_lead = 1.0 / (1.0 - peaks[i + 1]);
  double bracket = scales[i + 1];
  d.partial_sums.push_back(scales[i] - inv_lead * bracket);
  double prod = 1.0;
  for (std::size_t n = i + 2; n <= n_max; ++n) {
    prod /= peaks[n];
    bracket += scales[n] * prod;
    d.partial_sums.push_back(scales[i] - inv_lead * bracket);
  }
  d.residual = d.partial_sums.back();
  return d;
}

/// Consecutive scales obey the recurrence within tol * s_i. Only pairs whose
/// a_{i+2} lies inside the peak list are checked.
inline bool is_on_differentiable_manifold(const ManifoldParams& p, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const auto& a = p.peaks;
  const auto& s = p.scales;
  for (std::size_t i = 0; i + 2 < p.depth(); ++i) {
    const double expected = s[i] * (1.0 - a[i + 1]) * a[i + 2];
    if (std::abs(s[i + 1] - expected) > tol * s[i]) return false;
  }
  return true;
}

/// max_i s_{i+2} / s_i.
inline double scale_ratio_bound(const ManifoldParams& p) {
  if (p.depth() < 3) {
    throw std::invalid_argument("scale_ratio_bound needs depth >= 3");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i + 2 < p.depth(); ++i) {
    if (!(p.scales[i] > 0.0)) {
      throw std::domain_error("scale_ratio_bound: zero scale");
    }
    worst = std::max(worst, p.scales[i + 2] / p.scales[i]);
  }
  return worst;
}

/// Subtract mode: slopes non-decreasing (convex). Add mode: non-increasing.
inline bool convexity_check(const PwlFunction& f, Mode mode,
                            double tol = kCollinearTol) {
  const auto sp = derivative(f);
  const double dir = mode == Mode::Subtract ? 1.0 : -1.0;
  for (std::size_t k = 0; k + 1 < sp.intervals.size(); ++k) {
    const double a = sp.intervals[k].slope;
    const double b = sp.intervals[k + 1].slope;
    const double scale = std::max({std::abs(a), std::abs(b), 1.0});
    if (dir * (b - a) < -tol * scale) return false;
  }
  return true;
}

struct GapQuotients {
  double left = 0.0;
  double right = 0.0;
};

/// Difference quotients of F' around the leftmost peak of W_i after n
/// refinements, using the closed-form neighbour spacing and derivative drop.
/// Scales are derived (base 1) over the supplied peak sequence, which must
/// cover indices 0..i+n. Sign follows the curvature of the mode.
inline GapQuotients second_derivative_gap(std::span<const double> peaks,
                                          Mode mode, std::size_t i,
                                          std::size_t n) {
  if (n < 2) throw std::invalid_argument("second_derivative_gap needs n >= 2");
  if (peaks.size() < i + n + 1) {
    throw std::invalid_argument("second_derivative_gap: peak sequence too short");
  }
  const auto s = derive_scales_t<double>(peaks, mode, 1.0);

  // Leftmost peak of W_i sits on a rising stretch of W_{i-1}; its triangle
  // copy is not mirrored, so the left/right slopes are K/a_i and K/(1-a_i).
  double k_factor = 1.0;
  for (std::size_t k = 0; k < i; ++k) k_factor /= peaks[k];
  const double l_factor = peaks[i];
  const double r_factor = 1.0 - peaks[i];

  double dx_prod = 1.0 - peaks[i + 1];
  double dy_prod = 1.0;
  for (std::size_t m = 2; m <= n; ++m) {
    dx_prod *= peaks[i + m];
    dy_prod *= 1.0 - peaks[i + m];
  }
  const double sign = mode == Mode::Subtract ? 1.0 : -1.0;
  auto quotient = [&](double side) {
    const double dy = s[i] * (k_factor / side) * dy_prod;
    const double dx = (side / k_factor) * dx_prod;
    return sign * dy / dx;
  };
  return {quotient(l_factor), quotient(r_factor)};
}

/// max over P_i of |f_deep - f_i|, with f_k the first k waves on the line.
inline double max_error_at_peaks(const ManifoldParams& p, std::size_t i,
                                 std::size_t deep_depth) {
  if (!(i < deep_depth && deep_depth <= p.depth())) {
    throw std::invalid_argument("max_error_at_peaks needs i < deep_L <= depth");
  }
  const auto deep = partial_function(p, deep_depth);
  const auto shallow = partial_function(p, i);
  const auto peak_xs = level_points(composed_wave(p.peaks, i), 1.0);
  double worst = 0.0;
  for (double x : peak_xs) worst = std::max(worst, std::abs(deep(x) - shallow(x)));
  return worst;
}

}  // namespace compnet
