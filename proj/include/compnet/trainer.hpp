#pragma once

// Two-stage training of compositional networks plus the baseline regimes.
//
// Stage 1 runs ADAM on manifold coordinates: theta_i with
// a_i = eps + (1 - 2 eps) logistic(theta_i), and, when scales are free,
// phi_i with s_i = exp(phi_i). The loss is the MSE of the synthesized dense
// net, so gradients go coordinates -> weights (forward-mode duals) -> loss
// (dense backprop). Stage 2 frees the weights and runs plain ADAM on them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "compnet/adam.hpp"
#include "compnet/dense_net.hpp"
#include "compnet/dual.hpp"
#include "compnet/init.hpp"
#include "compnet/manifold.hpp"
#include "compnet/pwl.hpp"
#include "compnet/synthesis.hpp"

namespace compnet {

// ---------------------------------------------------------------- targets

enum class Target { Cube, Pow11, Tanh3x, QuarterSine, Square, CustomSamples };

inline std::string_view to_string(Target t) {
  switch (t) {
    case Target::Cube: return "cube";
    case Target::Pow11: return "pow11";
    case Target::Tanh3x: return "tanh3x";
    case Target::QuarterSine: return "quarter_sine";
    case Target::Square: return "square";
    case Target::CustomSamples: return "custom";
  }
  return "?";
}

inline Target target_from_string(std::string_view s) {
  for (Target t : {Target::Cube, Target::Pow11, Target::Tanh3x,
                   Target::QuarterSine, Target::Square}) {
    if (s == to_string(t)) return t;
  }
  throw std::invalid_argument("unknown target '" + std::string(s) + "'");
}

class TargetFunction {
 public:
  explicit TargetFunction(Target tag) : tag_(tag) {
    if (tag == Target::CustomSamples) {
      throw std::invalid_argument("custom targets are built from samples");
    }
  }

  /// Linear interpolation of (x, y) samples covering [0,1].
  static TargetFunction from_samples(std::vector<Breakpoint> samples) {
    TargetFunction t;
    t.tag_ = Target::CustomSamples;
    t.interp_ = PwlFunction(std::move(samples));
    return t;
  }

  Target tag() const { return tag_; }

  double operator()(double x) const {
    switch (tag_) {
      case Target::Cube: return x * x * x;
      case Target::Pow11: return std::pow(x, 11);
      case Target::Tanh3x: return std::tanh(3.0 * x);
      case Target::QuarterSine: return std::sin(std::numbers::pi / 2.0 * x);
      case Target::Square: return x * x;
      case Target::CustomSamples: return (*interp_)(x);
    }
    return 0.0;
  }

  /// Convex targets sit below y = x and subtract waves; concave ones add.
  Mode mode() const {
    switch (tag_) {
      case Target::Tanh3x:
      case Target::QuarterSine: return Mode::Add;
      case Target::CustomSamples: {
        double above = 0.0;
        for (double x : uniform_grid(101)) above += (*this)(x) - x;
        return above > 0.0 ? Mode::Add : Mode::Subtract;
      }
      default: return Mode::Subtract;
    }
  }

 private:
  TargetFunction() = default;
  Target tag_ = Target::Square;
  std::optional<PwlFunction> interp_;
};

inline constexpr std::size_t kDatasetSize = 500;

struct Dataset {
  std::vector<double> xs;
  std::vector<double> ys;
};

inline Dataset make_dataset(const TargetFunction& target) {
  Dataset d;
  d.xs = uniform_grid(kDatasetSize);
  d.ys.reserve(d.xs.size());
  for (double x : d.xs) d.ys.push_back(target(x));
  return d;
}

// ---------------------------------------------------------------- config

enum class Regime { Default, RAAI, NoOptimization, ManifoldFree, ManifoldEnforced };

inline constexpr Regime kAllRegimes[] = {Regime::Default, Regime::RAAI,
                                         Regime::NoOptimization,
                                         Regime::ManifoldFree,
                                         Regime::ManifoldEnforced};

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Default: return "default";
    case Regime::RAAI: return "raai";
    case Regime::NoOptimization: return "no_optimization";
    case Regime::ManifoldFree: return "manifold_free";
    case Regime::ManifoldEnforced: return "manifold_enforced";
  }
  return "?";
}

inline Regime regime_from_string(std::string_view s) {
  for (Regime r : kAllRegimes) {
    if (s == to_string(r)) return r;
  }
  throw std::invalid_argument("unknown regime '" + std::string(s) + "'");
}

inline bool is_manifold_regime(Regime r) {
  return r == Regime::ManifoldFree || r == Regime::ManifoldEnforced;
}

struct TrainConfig {
  Regime regime = Regime::ManifoldEnforced;
  std::size_t depth = 5;
  std::size_t epochs_stage1 = 500;
  std::size_t epochs_stage2 = 500;
  double lr = 1e-3;           // raw-weight ADAM (stage 2 and baselines)
  double lr_manifold = 1e-2;  // stage-1 ADAM on (theta, phi)
  std::uint64_t seed = 0;
  double clamp_eps = kPeakEpsilon;
  double tail_peak = kDefaultTailPeak;
  double p0_lo = 0.2;
  double p0_hi = 0.8;
  std::size_t segment_log_every = 50;
  std::size_t stage1_segment_log_every = 1;
  double divergence_threshold = 1e6;

  std::size_t total_epochs() const { return epochs_stage1 + epochs_stage2; }

  void validate() const {
    if (depth < 1) throw std::invalid_argument("TrainConfig: depth must be >= 1");
    if (is_manifold_regime(regime) && depth < 2) {
      throw std::invalid_argument("TrainConfig: manifold regimes need depth >= 2");
    }
    if (!(lr >= 0.0) || !(lr_manifold >= 0.0)) {
      throw std::invalid_argument("TrainConfig: negative learning rate");
    }
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
      throw std::invalid_argument("TrainConfig: clamp_eps must be in (0, 0.5)");
    }
    if (!(p0_lo >= clamp_eps && p0_hi <= 1.0 - clamp_eps && p0_lo <= p0_hi)) {
      throw std::invalid_argument("TrainConfig: bad p0 range");
    }
    if (segment_log_every == 0 || stage1_segment_log_every == 0) {
      throw std::invalid_argument("TrainConfig: segment log interval must be > 0");
    }
  }
};

/// Raised when the loss stops being finite or exceeds the threshold. Carries
/// the losses the stage recorded up to and including the bad one.
struct DivergenceError : std::runtime_error {
  std::size_t epoch;
  double loss;
  std::vector<double> trace;
  DivergenceError(std::string_view stage, std::size_t e, double l,
                  std::vector<double> partial = {})
      : std::runtime_error(message(stage, e, l)), epoch(e), loss(l), trace(std::move(partial)) {}

 private:
  static std::string message(std::string_view stage, std::size_t e, double l) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " diverged at epoch %zu (loss %.6g)", e, l);
    return std::string(stage) + buf;
  }
};

inline void check_divergence(std::string_view stage, std::size_t epoch, double loss,
                             double threshold, std::vector<double>* trace = nullptr) {
  if (!std::isfinite(loss) || loss > threshold) {
    throw DivergenceError(stage, epoch, loss, trace ? std::move(*trace) : std::vector<double>{});
  }
}

// ---------------------------------------------------------------- seeding

// Independent streams derived from the run seed.
enum class Stream : std::uint64_t { Init = 1, Peaks = 2 };

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

/// Shared starting point of the manifold regimes for a seed.
inline ManifoldParams sample_p0(std::uint64_t seed, Mode mode,
                                const TrainConfig& cfg) {
  auto rng = make_rng(seed, Stream::Peaks);
  std::uniform_real_distribution<double> u(cfg.p0_lo, cfg.p0_hi);
  std::vector<double> peaks(cfg.depth);
  for (auto& a : peaks) a = u(rng);
  return on_manifold(std::move(peaks), mode, 1.0, cfg.tail_peak);
}

// ---------------------------------------------------------------- stage 1

/// Unconstrained stage-1 coordinates. log_scales is empty when the scales
/// are derived from the peaks.
struct ManifoldCoords {
  std::vector<double> theta;
  std::vector<double> log_scales;

  std::size_t size() const { return theta.size() + log_scales.size(); }
  std::vector<double> flat() const {
    auto v = theta;
    v.insert(v.end(), log_scales.begin(), log_scales.end());
    return v;
  }
  void set_flat(std::span<const double> v) {
    std::copy_n(v.begin(), theta.size(), theta.begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(theta.size()), v.end(),
              log_scales.begin());
  }
};

inline constexpr double kThetaLimit = 30.0;

template <class T>
T peak_from_theta(const T& theta, double eps) {
  const T one(1.0);
  return T(eps) + T(1.0 - 2.0 * eps) * (one / (one + exp(-theta)));
}

inline double peak_from_theta(double theta, double eps) {
  return eps + (1.0 - 2.0 * eps) / (1.0 + std::exp(-theta));
}

inline double theta_from_peak(double a, double eps) {
  const double u = (a - eps) / (1.0 - 2.0 * eps);
  return std::clamp(std::log(u / (1.0 - u)), -kThetaLimit, kThetaLimit);
}

inline ManifoldCoords to_coords(const ManifoldParams& p, bool free_scales,
                                double eps) {
  ManifoldCoords c;
  for (double a : p.peaks) c.theta.push_back(theta_from_peak(a, eps));
  if (free_scales) {
    for (double s : p.scales) {
      if (!(s > 0.0)) throw std::domain_error("free scales must be positive");
      c.log_scales.push_back(std::log(s));
    }
  }
  return c;
}

inline ManifoldParams from_coords(const ManifoldCoords& c, Mode mode,
                                  const TrainConfig& cfg) {
  ManifoldParams p;
  p.mode = mode;
  for (double t : c.theta) {
    p.peaks.push_back(
        std::clamp(peak_from_theta(t, cfg.clamp_eps), cfg.clamp_eps, 1.0 - cfg.clamp_eps));
  }
  if (c.log_scales.empty()) {
    p.scales = derive_scales_t<double>(p.peaks, mode, 1.0, cfg.tail_peak);
  } else {
    for (double l : c.log_scales) p.scales.push_back(std::exp(l));
  }
  return p;
}

struct ManifoldLossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as ManifoldCoords::flat()
  DenseNet net;
};

/// Loss of the synthesized net at c, and its gradient with respect to c.
inline ManifoldLossGrad manifold_loss_grad(const ManifoldCoords& c, Mode mode,
                                           const Dataset& data,
                                           const TrainConfig& cfg) {
  const std::size_t n = c.size();
  const std::size_t depth = c.theta.size();
  std::vector<Dual> peaks;
  peaks.reserve(depth);
  for (std::size_t k = 0; k < depth; ++k) {
    peaks.push_back(peak_from_theta(Dual::variable(c.theta[k], k, n), cfg.clamp_eps));
  }
  std::vector<Dual> scales;
  if (c.log_scales.empty()) {
    scales = derive_scales_t<Dual>(peaks, mode, Dual(1.0), cfg.tail_peak);
  } else {
    for (std::size_t k = 0; k < depth; ++k) {
      scales.push_back(exp(Dual::variable(c.log_scales[k], depth + k, n)));
    }
  }
  const auto synth = synthesize_layers<Dual>(peaks, scales, mode);

  ManifoldLossGrad out;
  out.net = to_dense_net(synth);
  const auto lg = backward(out.net, data.xs, data.ys);
  out.loss = lg.loss;
  out.grad.assign(n, 0.0);
  const auto dw = lg.grads.flat();
  std::size_t j = 0;
  auto accumulate = [&](const Dual& weight) {
    for (std::size_t k = 0; k < n; ++k) out.grad[k] += dw[j] * weight.tangent(k);
    ++j;
  };
  for (const auto& l : synth) {
    for (const auto& w : l.w) accumulate(w);
    for (const auto& b : l.b) accumulate(b);
  }
  return out;
}

/// Loss at c through plain double synthesis.
inline double manifold_loss(const ManifoldCoords& c, Mode mode,
                            const Dataset& data, const TrainConfig& cfg) {
  const auto p = from_coords(c, mode, cfg);
  const auto net = to_dense_net(synthesize_layers<double>(p.peaks, p.scales, mode));
  return mse(net, data.xs, data.ys);
}

struct SegmentLog {
  std::size_t epoch = 0;
  std::size_t segments = 0;
  friend bool operator==(const SegmentLog&, const SegmentLog&) = default;
};

struct Stage1Result {
  ManifoldParams params;
  std::vector<double> trace;     // loss before each epoch's update
  std::vector<SegmentLog> segments;
  std::size_t off_manifold_epochs = 0;
  double final_loss = 0.0;
};

inline Stage1Result stage1_manifold_train(const ManifoldParams& p0,
                                          const Dataset& data,
                                          const TrainConfig& cfg) {
  if (!is_manifold_regime(cfg.regime)) {
    throw std::invalid_argument("stage 1 needs a manifold regime");
  }
  cfg.validate();
  p0.validate();
  const bool free_scales = cfg.regime == Regime::ManifoldFree;
  Stage1Result r;
  if (cfg.epochs_stage1 == 0) {
    r.params = p0;
    const auto net = to_dense_net(synthesize_layers<double>(p0.peaks, p0.scales, p0.mode));
    r.final_loss = mse(net, data.xs, data.ys);
    return r;
  }

  auto coords = to_coords(p0, free_scales, cfg.clamp_eps);
  AdamState adam(coords.size(), {.lr = cfg.lr_manifold});
  auto flat = coords.flat();
  for (std::size_t e = 0; e < cfg.epochs_stage1; ++e) {
    const auto lg = manifold_loss_grad(coords, p0.mode, data, cfg);
    r.trace.push_back(lg.loss);
    check_divergence("stage 1", e, lg.loss, cfg.divergence_threshold, &r.trace);
    if (e % cfg.stage1_segment_log_every == 0) {
      r.segments.push_back({e, segment_count(exact_output_pwl(lg.net))});
    }
    if (!free_scales) {
      if (!is_on_differentiable_manifold(from_coords(coords, p0.mode, cfg), 1e-9)) {
        ++r.off_manifold_epochs;
      }
    }
    adam_step(adam, flat, lg.grad);
    for (std::size_t k = 0; k < coords.theta.size(); ++k) {
      flat[k] = std::clamp(flat[k], -kThetaLimit, kThetaLimit);
    }
    coords.set_flat(flat);
  }
  r.params = from_coords(coords, p0.mode, cfg);
  const auto net = to_dense_net(synthesize_layers<double>(r.params.peaks, r.params.scales,
                                                          r.params.mode));
  r.final_loss = mse(net, data.xs, data.ys);
  check_divergence("stage 1", cfg.epochs_stage1, r.final_loss, cfg.divergence_threshold,
                   &r.trace);
  r.segments.push_back({cfg.epochs_stage1, segment_count(exact_output_pwl(net))});
  return r;
}

// ---------------------------------------------------------------- stage 2

struct Stage2Result {
  DenseNet net;
  std::vector<double> trace;
  std::vector<SegmentLog> segments;
  double final_loss = 0.0;
};

inline Stage2Result stage2_finetune(DenseNet net, const Dataset& data,
                                    std::size_t epochs, const TrainConfig& cfg) {
  Stage2Result r;
  AdamState adam(net.num_parameters(), {.lr = cfg.lr});
  auto params = net.parameters();
  for (std::size_t e = 0; e < epochs; ++e) {
    if (e % cfg.segment_log_every == 0) {
      r.segments.push_back({e, segment_count(exact_output_pwl(net))});
    }
    const auto lg = backward(net, data.xs, data.ys);
    r.trace.push_back(lg.loss);
    check_divergence("stage 2", e, lg.loss, cfg.divergence_threshold, &r.trace);
    adam_step(adam, params, lg.grads.flat());
    net.set_parameters(params);
  }
  r.final_loss = mse(net, data.xs, data.ys);
  check_divergence("stage 2", epochs, r.final_loss, cfg.divergence_threshold, &r.trace);
  r.segments.push_back({epochs, segment_count(exact_output_pwl(net))});
  r.net = std::move(net);
  return r;
}

// ---------------------------------------------------------------- pipeline

struct RunResult {
  Regime regime = Regime::Default;
  Target target = Target::Cube;
  std::uint64_t seed = 0;
  std::size_t depth = 0;
  std::vector<double> trace;  // stage 1 then stage 2, loss before each update
  double initial_mse = 0.0;
  double final_mse = 0.0;
  double best_mse = 0.0;
  std::size_t final_segments = 0;
  std::vector<SegmentLog> stage1_segments;
  std::vector<SegmentLog> stage2_segments;  // epochs counted within stage 2
  std::vector<bool> dead_layers;
  std::size_t stage_transition_epoch = 0;
  std::size_t off_manifold_epochs = 0;
  bool collapsed = false;
  bool diverged = false;
  std::string abort_reason;
  std::optional<ManifoldParams> p0;
  std::optional<ManifoldParams> stage1_params;
  double wall_time_s = 0.0;
  DenseNet model;

  /// MSE used for aggregation: final MSE, or the first finite loss of a
  /// diverged run.
  double reported_mse() const { return final_mse; }
};

inline RunResult run_pipeline(Regime regime, const TargetFunction& target,
                              std::uint64_t seed, TrainConfig cfg) {
  cfg.regime = regime;
  cfg.seed = seed;
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto data = make_dataset(target);
  const Mode mode = target.mode();

  RunResult r;
  r.regime = regime;
  r.target = target.tag();
  r.seed = seed;
  r.depth = cfg.depth;
  const auto widths = uniform_widths(cfg.depth, kCompositionalWidth);

  try {
    DenseNet net;
    std::size_t stage2_epochs = cfg.total_epochs();
    switch (regime) {
      case Regime::Default:
        net = init_kaiming(widths, make_rng(seed, Stream::Init)());
        break;
      case Regime::RAAI:
        net = init_raai(widths, make_rng(seed, Stream::Init)());
        break;
      case Regime::NoOptimization:
        r.p0 = sample_p0(seed, mode, cfg);
        net = synthesize_compositional(*r.p0);
        break;
      case Regime::ManifoldFree:
      case Regime::ManifoldEnforced: {
        r.p0 = sample_p0(seed, mode, cfg);
        auto s1 = stage1_manifold_train(*r.p0, data, cfg);
        r.trace = std::move(s1.trace);
        r.stage1_segments = std::move(s1.segments);
        r.off_manifold_epochs = s1.off_manifold_epochs;
        r.stage1_params = s1.params;
        r.stage_transition_epoch = cfg.epochs_stage1;
        net = to_dense_net(synthesize_layers<double>(s1.params.peaks, s1.params.scales,
                                                     s1.params.mode));
        stage2_epochs = cfg.epochs_stage2;
        break;
      }
    }
    auto s2 = stage2_finetune(std::move(net), data, stage2_epochs, cfg);
    r.trace.insert(r.trace.end(), s2.trace.begin(), s2.trace.end());
    r.stage2_segments = std::move(s2.segments);
    r.final_mse = s2.final_loss;
    r.model = std::move(s2.net);
  } catch (DivergenceError& err) {
    r.trace.insert(r.trace.end(), err.trace.begin(), err.trace.end());
    r.diverged = true;
    r.abort_reason = err.what();
  }

  if (r.diverged) {
    const auto first = std::find_if(r.trace.begin(), r.trace.end(),
                                    [](double v) { return std::isfinite(v); });
    r.final_mse = first != r.trace.end() ? *first : INFINITY;
  }
  r.initial_mse = r.trace.empty() ? r.final_mse : r.trace.front();
  r.best_mse = r.final_mse;
  for (double v : r.trace) r.best_mse = std::min(r.best_mse, v);

  const auto& last_log = !r.stage2_segments.empty() ? r.stage2_segments
                                                     : r.stage1_segments;
  r.final_segments = last_log.empty() ? 1 : last_log.back().segments;
  if (!r.model.layers().empty()) {
    r.dead_layers = dying_relu_report(r.model, data.xs);
  }
  r.collapsed = r.final_segments == 1;
  r.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace compnet
