#pragma once

// Forward-mode dual number with a dynamic tangent vector. Used to carry
// derivatives with respect to the manifold coordinates through scale
// derivation and weight synthesis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace compnet {

struct Dual {
  double v = 0.0;
  std::vector<double> d;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit constant
  Dual(double value, std::vector<double> tangent)
      : v(value), d(std::move(tangent)) {}

  /// Seed variable k out of n.
  static Dual variable(double value, std::size_t k, std::size_t n) {
    std::vector<double> t(n, 0.0);
    t[k] = 1.0;
    return {value, std::move(t)};
  }

  double tangent(std::size_t k) const { return k < d.size() ? d[k] : 0.0; }
};

namespace detail {

template <class F>
std::vector<double> zip(const std::vector<double>& a,
                        const std::vector<double>& b, F f) {
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = f(k < a.size() ? a[k] : 0.0, k < b.size() ? b[k] : 0.0);
  }
  return out;
}

}  // namespace detail

inline Dual operator+(const Dual& a, const Dual& b) {
  return {a.v + b.v, detail::zip(a.d, b.d, [](double x, double y) { return x + y; })};
}
inline Dual operator-(const Dual& a, const Dual& b) {
  return {a.v - b.v, detail::zip(a.d, b.d, [](double x, double y) { return x - y; })};
}
inline Dual operator-(const Dual& a) {
  Dual r = a;
  r.v = -r.v;
  for (auto& t : r.d) t = -t;
  return r;
}
inline Dual operator*(const Dual& a, const Dual& b) {
  return {a.v * b.v, detail::zip(a.d, b.d, [&](double x, double y) {
            return x * b.v + a.v * y;
          })};
}
inline Dual operator/(const Dual& a, const Dual& b) {
  const double q = a.v / b.v;
  return {q, detail::zip(a.d, b.d, [&](double x, double y) {
            return (x - q * y) / b.v;
          })};
}

inline Dual exp(const Dual& a) {
  Dual r = a;
  r.v = std::exp(a.v);
  for (auto& t : r.d) t *= r.v;
  return r;
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

}  // namespace compnet
