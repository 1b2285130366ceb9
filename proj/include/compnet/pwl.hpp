#pragma once

// Exact algebra of continuous piecewise-linear functions on [0,1].
//
// A PwlFunction is an ordered list of breakpoints (x, y) with x strictly
// increasing from 0 to 1; the value between breakpoints is the linear
// interpolant. Every operation returns a new, valid PwlFunction, so values
// can be shared freely between threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace compnet {

/// Relative slope difference under which two adjacent segments are one.
inline constexpr double kCollinearTol = 1e-9;
/// Breakpoints closer than this in x are merged, keeping the left value.
inline constexpr double kDedupTol = 1e-12;
/// How far an inner function may stray outside [0,1] before composition
/// refuses it.
inline constexpr double kRangeTol = 1e-9;

struct Breakpoint {
  double x;
  double y;

  friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
};

struct SlopeInterval {
  double x_lo;
  double x_hi;
  double slope;
};

/// Piecewise-constant derivative of a PwlFunction, one entry per maximal
/// interval of constant slope.
struct SlopeProfile {
  std::vector<SlopeInterval> intervals;

  double slope_at(double x) const {
    for (const auto& iv : intervals) {
      if (x < iv.x_hi) return iv.slope;
    }
    return intervals.back().slope;
  }
};

namespace detail {

inline bool slopes_collinear(double s1, double s2, double tol) {
  const double scale = std::max({std::abs(s1), std::abs(s2), 1.0});
  return std::abs(s1 - s2) <= tol * scale;
}

inline double slope(const Breakpoint& a, const Breakpoint& b) {
  return (b.y - a.y) / (b.x - a.x);
}

// Drops interior breakpoints whose neighbouring segments are collinear.
// Repeats until stable so that simplifying twice is a no-op.
inline std::vector<Breakpoint> merge_collinear(std::vector<Breakpoint> pts,
                                               double tol) {
  bool changed = true;
  while (changed && pts.size() > 2) {
    changed = false;
    std::vector<Breakpoint> out;
    out.reserve(pts.size());
    out.push_back(pts.front());
    for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
      const double left = slope(out.back(), pts[k]);
      const double right = slope(pts[k], pts[k + 1]);
      if (slopes_collinear(left, right, tol)) {
        changed = true;
        continue;
      }
      out.push_back(pts[k]);
    }
    out.push_back(pts.back());
    pts = std::move(out);
  }
  return pts;
}

}  // namespace detail

class PwlFunction {
 public:
  /// Validates the breakpoint list and merges x-duplicates closer than
  /// kDedupTol. Does not merge collinear segments; see simplified().
  explicit PwlFunction(std::vector<Breakpoint> pts) {
    if (pts.size() < 2) {
      throw std::invalid_argument("PwlFunction needs at least 2 breakpoints");
    }
    for (const auto& p : pts) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw std::domain_error("PwlFunction breakpoint is not finite");
      }
    }
    if (std::abs(pts.front().x) > kDedupTol ||
        std::abs(pts.back().x - 1.0) > kDedupTol) {
      throw std::domain_error("PwlFunction domain must be [0,1]");
    }
    pts.front().x = 0.0;
    pts.back().x = 1.0;

    pts_.reserve(pts.size());
    pts_.push_back(pts.front());
    for (std::size_t k = 1; k < pts.size(); ++k) {
      const auto& p = pts[k];
      const double gap = p.x - pts_.back().x;
      if (gap < -kDedupTol) {
        throw std::invalid_argument("PwlFunction x-coordinates must increase");
      }
      if (gap <= kDedupTol) {
        // The right endpoint must survive; it keeps the left neighbour's value.
        if (k + 1 == pts.size() && pts_.size() > 1) pts_.back().x = 1.0;
        continue;
      }
      pts_.push_back(p);
    }
    if (pts_.size() < 2) {
      throw std::invalid_argument("PwlFunction collapsed to a single point");
    }
  }

  static PwlFunction line(double slope, double intercept) {
    return PwlFunction({{0.0, intercept}, {1.0, slope + intercept}});
  }
  static PwlFunction constant(double c) { return line(0.0, c); }
  static PwlFunction identity() { return line(1.0, 0.0); }

  const std::vector<Breakpoint>& breakpoints() const { return pts_; }
  std::size_t size() const { return pts_.size(); }
  std::size_t num_segments() const { return pts_.size() - 1; }

  /// Value at x; x outside [0,1] is a domain error.
  double operator()(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw std::domain_error("PwlFunction evaluated outside [0,1]");
    }
    auto it = std::upper_bound(
        pts_.begin(), pts_.end(), x,
        [](double v, const Breakpoint& b) { return v < b.x; });
    if (it == pts_.end()) return pts_.back().y;
    const auto& lo = *(it - 1);
    if (x == lo.x) return lo.y;
    const auto& hi = *it;
    return lo.y + (hi.y - lo.y) * ((x - lo.x) / (hi.x - lo.x));
  }

  /// Copy with collinear neighbours merged at the given relative tolerance.
  PwlFunction simplified(double tol = kCollinearTol) const {
    return PwlFunction(detail::merge_collinear(pts_, tol), Trusted{});
  }

  friend bool operator==(const PwlFunction&, const PwlFunction&) = default;

 private:
  struct Trusted {};
  PwlFunction(std::vector<Breakpoint> pts, Trusted) : pts_(std::move(pts)) {}

  std::vector<Breakpoint> pts_;
};

// Builds from raw points: dedup, then collinear merge.
inline PwlFunction make_pwl(std::vector<Breakpoint> pts) {
  return PwlFunction(std::move(pts)).simplified();
}

inline double eval(const PwlFunction& f, double x) { return f(x); }

inline PwlFunction triangle(double peak) {
  if (!(peak > 0.0 && peak < 1.0)) {
    throw std::domain_error("triangle peak must lie in (0,1)");
  }
  return PwlFunction({{0.0, 0.0}, {peak, 1.0}, {1.0, 0.0}});
}

/// outer(inner(x)). Breakpoints are inner's breakpoints plus the preimages of
/// outer's breakpoints on each inner segment; values at those preimages are
/// outer's breakpoint values exactly.
inline PwlFunction compose(const PwlFunction& outer, const PwlFunction& inner) {
  const auto& ob = outer.breakpoints();
  const auto& ib = inner.breakpoints();

  auto clamp_range = [](double y) {
    if (y < -kRangeTol || y > 1.0 + kRangeTol) {
      throw std::domain_error("compose: inner range escapes [0,1]");
    }
    return std::clamp(y, 0.0, 1.0);
  };

  std::vector<Breakpoint> out;
  out.reserve(ib.size() * 2);
  for (std::size_t k = 0; k + 1 < ib.size(); ++k) {
    const Breakpoint p0{ib[k].x, clamp_range(ib[k].y)};
    const Breakpoint p1{ib[k + 1].x, clamp_range(ib[k + 1].y)};
    out.push_back({p0.x, outer(p0.y)});
    if (p0.y == p1.y) continue;

    const double lo = std::min(p0.y, p1.y);
    const double hi = std::max(p0.y, p1.y);
    auto first = std::upper_bound(
        ob.begin(), ob.end(), lo,
        [](double v, const Breakpoint& b) { return v < b.x; });
    auto last = std::lower_bound(
        ob.begin(), ob.end(), hi,
        [](const Breakpoint& b, double v) { return b.x < v; });
    if (first >= last) continue;

    auto push_preimage = [&](const Breakpoint& b) {
      const double t = (b.x - p0.y) / (p1.y - p0.y);
      out.push_back({p0.x + t * (p1.x - p0.x), b.y});
    };
    if (p1.y > p0.y) {
      for (auto it = first; it != last; ++it) push_preimage(*it);
    } else {
      for (auto it = last; it != first;) push_preimage(*--it);
    }
  }
  out.push_back({ib.back().x, outer(clamp_range(ib.back().y))});
  return make_pwl(std::move(out));
}

namespace detail {

inline std::vector<double> union_xs(std::span<const PwlFunction* const> fs) {
  std::vector<double> xs;
  for (const auto* f : fs) {
    for (const auto& b : f->breakpoints()) xs.push_back(b.x);
  }
  std::sort(xs.begin(), xs.end());
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    if (out.empty() || x - out.back() > kDedupTol) out.push_back(x);
  }
  if (out.back() != 1.0) out.back() = 1.0;
  return out;
}

}  // namespace detail

struct Term {
  double coefficient;
  const PwlFunction* f;
};

/// offset + sum of coefficient * f over the union of all breakpoints.
inline PwlFunction affine_combine(std::span<const Term> terms,
                                  double offset = 0.0) {
  if (terms.empty()) {
    throw std::invalid_argument("affine_combine needs at least one term");
  }
  std::vector<const PwlFunction*> fs;
  fs.reserve(terms.size());
  for (const auto& t : terms) fs.push_back(t.f);
  const auto xs = detail::union_xs(fs);

  std::vector<Breakpoint> pts(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) pts[k] = {xs[k], offset};
  for (const auto& t : terms) {
    if (t.coefficient == 0.0) continue;
    for (auto& p : pts) p.y += t.coefficient * (*t.f)(p.x);
  }
  return make_pwl(std::move(pts));
}

inline PwlFunction affine_combine(std::initializer_list<Term> terms,
                                  double offset = 0.0) {
  return affine_combine(std::span<const Term>(terms.begin(), terms.size()),
                        offset);
}

/// Pointwise max(f, 0), with breakpoints inserted at exact zero crossings.
inline PwlFunction relu_clip(const PwlFunction& f) {
  const auto& b = f.breakpoints();
  std::vector<Breakpoint> out;
  out.reserve(b.size() + 4);
  for (std::size_t k = 0; k < b.size(); ++k) {
    out.push_back({b[k].x, std::max(b[k].y, 0.0)});
    if (k + 1 == b.size()) break;
    const auto& p0 = b[k];
    const auto& p1 = b[k + 1];
    if ((p0.y < 0.0 && p1.y > 0.0) || (p0.y > 0.0 && p1.y < 0.0)) {
      const double x = p0.x + (p1.x - p0.x) * (p0.y / (p0.y - p1.y));
      if (x - p0.x > kDedupTol && p1.x - x > kDedupTol) out.push_back({x, 0.0});
    }
  }
  return make_pwl(std::move(out));
}

/// Number of maximal constant-slope intervals at the given relative tolerance.
inline std::size_t segment_count(const PwlFunction& f,
                                 double collinear_tol = kCollinearTol) {
  if (!(collinear_tol > 0.0)) {
    throw std::invalid_argument("segment_count tolerance must be positive");
  }
  return f.simplified(collinear_tol).num_segments();
}

/// Sup-norm distance; exact for PWL pairs since the extremum sits on a
/// breakpoint of one of them.
inline double max_abs_diff(const PwlFunction& f, const PwlFunction& g) {
  const PwlFunction* fs[] = {&f, &g};
  double m = 0.0;
  for (double x : detail::union_xs(fs)) m = std::max(m, std::abs(f(x) - g(x)));
  return m;
}

inline SlopeProfile derivative(const PwlFunction& f) {
  const auto simple = f.simplified();
  const auto& b = simple.breakpoints();
  SlopeProfile sp;
  sp.intervals.reserve(b.size() - 1);
  for (std::size_t k = 0; k + 1 < b.size(); ++k) {
    sp.intervals.push_back({b[k].x, b[k + 1].x, detail::slope(b[k], b[k + 1])});
  }
  return sp;
}

/// x-locations of breakpoints whose value is within tol of `value`.
inline std::vector<double> level_points(const PwlFunction& f, double value,
                                        double tol = 1e-12) {
  std::vector<double> xs;
  for (const auto& b : f.breakpoints()) {
    if (std::abs(b.y - value) <= tol) xs.push_back(b.x);
  }
  return xs;
}

/// Interior points where the slope changes (bends).
inline std::vector<double> bends(const PwlFunction& f) {
  const auto simple = f.simplified();
  const auto& b = simple.breakpoints();
  std::vector<double> xs;
  for (std::size_t k = 1; k + 1 < b.size(); ++k) xs.push_back(b[k].x);
  return xs;
}

/// Sign changes between strictly positive and strictly negative stretches.
inline std::size_t zero_crossings(const PwlFunction& f) {
  std::size_t n = 0;
  int last_sign = 0;
  for (const auto& b : f.breakpoints()) {
    const int s = (b.y > 0.0) - (b.y < 0.0);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign) ++n;
    last_sign = s;
  }
  return n;
}

/// Debug dump: "x,y" header then one breakpoint per line at 17 digits.
inline void write_csv(std::ostream& os, const PwlFunction& f) {
  os << "x,y\n";
  char buf[64];
  for (const auto& b : f.breakpoints()) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", b.x, b.y);
    os << buf;
  }
}

}  // namespace compnet
