#pragma once

// Named invariant suites run by `compnet verify`. Every suite uses fixed
// seeds and reports its measured margins alongside the verdict.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "compnet/dense_net.hpp"
#include "compnet/init.hpp"
#include "compnet/manifold.hpp"
#include "compnet/synthesis.hpp"
#include "compnet/trainer.hpp"

namespace compnet {

struct SuiteReport {
  std::string name;
  bool passed = true;
  std::vector<std::string> lines;

  explicit SuiteReport(std::string n) : name(std::move(n)) {}

  void check(bool ok, const std::string& what) {
    passed = passed && ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

namespace detail {

inline std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

inline std::vector<double> uniform_peaks(std::mt19937_64& rng, std::size_t n,
                                         double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> a(n);
  for (auto& v : a) v = u(rng);
  return a;
}

inline Mode random_mode(std::mt19937_64& rng) {
  return rng() % 2 ? Mode::Add : Mode::Subtract;
}

}  // namespace detail

inline constexpr std::size_t kSeriesTruncation = 30;
inline constexpr std::size_t kSeriesPeriod = 5;

/// Truncated derivative-gap series with derived scales, and with s_i
/// raised by 1%.
inline SuiteReport suite_series(std::size_t draws = 100) {
  SuiteReport r("series");
  std::mt19937_64 rng(30);
  double worst = 0.0;
  double weakest_perturbed = INFINITY;
  std::size_t over = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto base = detail::uniform_peaks(rng, kSeriesPeriod, 0.2, 0.8);
    const auto a = periodic_peaks(base, kSeriesTruncation + 1);
    auto s = derive_scales(a, Mode::Subtract);
    const double rel = std::abs(error_series(a, s, 0, kSeriesTruncation).residual) / s[0];
    worst = std::max(worst, rel);
    over += rel > 1e-6;
    s[0] *= 1.01;
    const double pert = std::abs(error_series(a, s, 0, kSeriesTruncation).residual) / (s[0] / 1.01);
    weakest_perturbed = std::min(weakest_perturbed, pert);
  }
  r.check(over == 0, detail::fmt("derived scales: max residual/s_i = %.3g at N=%zu "
                                 "(limit 1e-6), %zu/%zu draws over",
                                 worst, kSeriesTruncation, over, draws));
  r.check(weakest_perturbed >= 1e-3,
          detail::fmt("1%% perturbed s_i: min residual/s_i = %.3g (limit >= 1e-3)",
                      weakest_perturbed));
  return r;
}

inline SuiteReport suite_convexity(std::size_t draws = 1000) {
  SuiteReport r("convexity");
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> depth(2, 8);
  std::size_t violations = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto p = on_manifold(detail::uniform_peaks(rng, depth(rng), 0.05, 0.95),
                               detail::random_mode(rng));
    violations += !convexity_check(ideal_function(p), p.mode);
  }
  r.check(violations == 0, detail::fmt("slope monotonicity: %zu/%zu violations",
                                       violations, draws));
  return r;
}

inline SuiteReport suite_ratio(std::size_t draws = 1000) {
  SuiteReport r("ratio");
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<std::size_t> depth(3, 10);
  double worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto p = on_manifold(
        detail::uniform_peaks(rng, depth(rng), kPeakEpsilon, 1.0 - kPeakEpsilon),
        detail::random_mode(rng));
    const double q = scale_ratio_bound(p);
    worst = std::max(worst, q);
    violations += q > 0.25;
  }
  r.check(violations == 0,
          detail::fmt("max s_{i+2}/s_i = %.6f over %zu draws (limit 0.25)", worst, draws));
  return r;
}

inline SuiteReport suite_decay(std::size_t draws = 50) {
  SuiteReport r("decay");
  std::mt19937_64 rng(33);
  constexpr std::size_t kDepth = 10;
  double worst_gap = 0.0;
  bool decays = true;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto p = on_manifold(detail::uniform_peaks(rng, kDepth, 0.1, 0.9),
                               detail::random_mode(rng));
    for (std::size_t i = 0; i <= 8; ++i) {
      worst_gap = std::max(worst_gap, std::abs(max_error_at_peaks(p, i, kDepth) - p.scales[i]));
      decays = decays && p.scales[i] <= p.scales[i % 2] * std::pow(0.25, i / 2) * (1 + 1e-12);
    }
  }
  r.check(worst_gap <= 1e-12,
          detail::fmt("max |error at P_i - s_i| = %.3g for i <= 8 (limit 1e-12)", worst_gap));
  r.check(decays, "s_i <= s_{i mod 2} * 0.25^floor(i/2)");
  return r;
}

inline SuiteReport suite_secondderiv() {
  SuiteReport r("secondderiv");
  constexpr std::size_t kLayer = 1;
  {
    const std::vector<double> half(kLayer + 13, 0.5);
    double worst_split = 0.0;
    for (std::size_t n = 2; n <= 12; ++n) {
      const auto q = second_derivative_gap(half, Mode::Subtract, kLayer, n);
      worst_split = std::max(worst_split, std::abs(q.left - q.right));
    }
    const auto q12 = second_derivative_gap(half, Mode::Subtract, kLayer, 12);
    r.check(worst_split <= 1e-9,
            detail::fmt("a=0.5: max |left - right| = %.3g (limit 1e-9)", worst_split));
    r.check(std::abs(q12.left - 2.0) <= 0.02,
            detail::fmt("a=0.5: quotient at n=12 = %.12g (target 2 within 1%%)", q12.left));
  }
  {
    const std::vector<double> third(kLayer + 11, 0.3);
    double smallest = INFINITY;
    for (std::size_t n = 2; n <= 10; ++n) {
      const auto q = second_derivative_gap(third, Mode::Subtract, kLayer, n);
      const double rel = std::abs(q.left - q.right) / std::max(std::abs(q.left), std::abs(q.right));
      smallest = std::min(smallest, rel);
    }
    r.check(smallest > 0.1,
            detail::fmt("a=0.3: min relative left/right gap over n=2..10 = %.4f (limit > 0.1)",
                        smallest));
  }
  return r;
}

inline SuiteReport suite_oracle(std::size_t draws = 200) {
  SuiteReport r("oracle");
  std::mt19937_64 rng(34);
  std::uniform_int_distribution<std::size_t> depth(2, 8);
  const auto grid = uniform_grid(2001);
  double worst = 0.0;
  std::size_t matches = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto p = on_manifold(detail::uniform_peaks(rng, depth(rng), 0.1, 0.9),
                               detail::random_mode(rng));
    const auto net = synthesize_compositional(p);
    const auto ideal = ideal_function(p);
    double sup = 0.0;
    for (double x : grid) sup = std::max(sup, std::abs(net(x) - ideal(x)));
    worst = std::max(worst, sup);
    matches += sup <= 1e-9;
  }
  r.check(matches == draws, detail::fmt("%zu/%zu synthesized nets within 1e-9 "
                                        "(max sup error %.3g)",
                                        matches, draws, worst));
  return r;
}

/// An analytic gradient entry passes when |analytic - fd| is within
/// rel_tol * max(|analytic|, |fd|) plus the rounding floor of the difference
/// quotient. worst_rel is the plain relative error over entries of
/// magnitude >= 1e-4; worst_allowance is the largest error / allowance.
struct GradCheck {
  double worst_rel = 0.0;
  double worst_allowance = 0.0;
  bool ok = true;
};

inline void compare_gradient(GradCheck& gc, double analytic, double fd,
                             double noise, double rel_tol) {
  const double scale = std::max(std::abs(analytic), std::abs(fd));
  const double err = std::abs(analytic - fd);
  const double allowance = rel_tol * scale + noise;
  if (scale >= 1e-4) gc.worst_rel = std::max(gc.worst_rel, err / scale);
  gc.worst_allowance = std::max(gc.worst_allowance, err / allowance);
  gc.ok = gc.ok && err <= allowance;
}

inline GradCheck check_dense_gradients(std::size_t cases, double rel_tol = 1e-5) {
  constexpr double h = 1e-6;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  GradCheck gc;
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t done = 0;
  for (std::uint64_t seed = 0; done < cases; ++seed) {
    auto net = init_kaiming(uniform_widths(6), seed);
    std::vector<double> xs(16), ys(16);
    for (auto& x : xs) x = unit(rng);
    for (auto& y : ys) y = unit(rng);
    // Skip batches that sit on a ReLU kink.
    double kink = INFINITY;
    for (double x : xs) {
      for (const auto& layer : forward(net, x).pre) {
        for (double z : layer) kink = std::min(kink, std::abs(z));
      }
    }
    if (kink < 1e-8) continue;
    ++done;
    const auto g = backward(net, xs, ys).grads.flat();
    auto p = net.parameters();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double keep = p[k];
      p[k] = keep + h;
      net.set_parameters(p);
      const double up = mse(net, xs, ys);
      p[k] = keep - h;
      net.set_parameters(p);
      const double down = mse(net, xs, ys);
      p[k] = keep;
      net.set_parameters(p);
      compare_gradient(gc, g[k], (up - down) / (2 * h),
                       8 * eps * std::max(up, down) / h, rel_tol);
    }
  }
  return gc;
}

inline GradCheck check_manifold_gradients(std::size_t cases, double rel_tol = 1e-4) {
  constexpr double h = 1e-6;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  GradCheck gc;
  std::mt19937_64 rng(36);
  std::uniform_int_distribution<std::size_t> depth(2, 6);
  const Target targets[] = {Target::Cube, Target::Pow11, Target::Tanh3x,
                            Target::QuarterSine, Target::Square};
  for (std::size_t c = 0; c < cases; ++c) {
    const TargetFunction target(targets[c % 5]);
    const auto data = make_dataset(target);
    TrainConfig cfg;
    cfg.regime = c % 2 ? Regime::ManifoldFree : Regime::ManifoldEnforced;
    const auto p = on_manifold(detail::uniform_peaks(rng, depth(rng), 0.15, 0.85),
                               target.mode());
    auto coords = to_coords(p, cfg.regime == Regime::ManifoldFree, cfg.clamp_eps);
    const auto lg = manifold_loss_grad(coords, p.mode, data, cfg);
    auto flat = coords.flat();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double keep = flat[k];
      flat[k] = keep + h;
      coords.set_flat(flat);
      const double up = manifold_loss(coords, p.mode, data, cfg);
      flat[k] = keep - h;
      coords.set_flat(flat);
      const double down = manifold_loss(coords, p.mode, data, cfg);
      flat[k] = keep;
      coords.set_flat(flat);
      compare_gradient(gc, lg.grad[k], (up - down) / (2 * h),
                       8 * eps * std::max(up, down) / h, rel_tol);
    }
  }
  return gc;
}

inline SuiteReport suite_gradcheck(std::size_t cases = 20) {
  SuiteReport r("gradcheck");
  const auto dense = check_dense_gradients(cases);
  r.check(dense.ok, detail::fmt("dense backward vs central differences: worst "
                                "relative error %.3g over %zu nets (limit 1e-5), "
                                "%.2f of allowance used",
                                dense.worst_rel, cases, dense.worst_allowance));
  const auto manifold = check_manifold_gradients(cases);
  r.check(manifold.ok, detail::fmt("manifold coordinates vs central differences: worst "
                                   "relative error %.3g over %zu cases (limit 1e-4), "
                                   "%.2f of allowance used",
                                   manifold.worst_rel, cases, manifold.worst_allowance));
  return r;
}

inline const std::vector<std::string_view>& suite_names() {
  static const std::vector<std::string_view> names{
      "series", "convexity", "ratio", "decay", "secondderiv", "oracle", "gradcheck"};
  return names;
}

inline SuiteReport run_suite(std::string_view name) {
  if (name == "series") return suite_series();
  if (name == "convexity") return suite_convexity();
  if (name == "ratio") return suite_ratio();
  if (name == "decay") return suite_decay();
  if (name == "secondderiv") return suite_secondderiv();
  if (name == "oracle") return suite_oracle();
  if (name == "gradcheck") return suite_gradcheck();
  throw std::invalid_argument("unknown suite '" + std::string(name) + "'");
}

}  // namespace compnet
