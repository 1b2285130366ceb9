#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "compnet/dense_net.hpp"
#include "compnet/manifold.hpp"
#include "compnet/synthesis.hpp"
#include "oracles.hpp"

namespace compnet {
namespace {

ManifoldParams random_params(std::mt19937_64& rng, std::size_t depth,
                             bool derived) {
  std::uniform_real_distribution<double> peak(0.1, 0.9);
  std::uniform_real_distribution<double> scale(0.0, 0.3);
  ManifoldParams p;
  p.mode = rng() % 2 ? Mode::Add : Mode::Subtract;
  for (std::size_t k = 0; k < depth; ++k) p.peaks.push_back(peak(rng));
  if (derived && depth >= 2) {
    p.scales = derive_scales(p.peaks, p.mode);
  } else {
    for (std::size_t k = 0; k < depth; ++k) p.scales.push_back(scale(rng));
  }
  return p;
}

double sup_vs_oracle(const DenseNet& net, const ManifoldParams& p,
                     std::size_t points) {
  double worst = 0.0;
  for (double x : uniform_grid(points)) {
    const double want = oracle::ideal(p.peaks, p.scales, p.mode == Mode::Add, x);
    worst = std::max(worst, std::abs(net(x) - want));
  }
  return worst;
}

TEST(Synthesis, HalfPeaksSquareDepthFive) {
  const auto p = on_manifold(std::vector<double>(5, 0.5), Mode::Subtract);
  const auto net = synthesize_compositional(p);
  EXPECT_EQ(net.widths(), (std::vector<std::size_t>{1, 4, 4, 4, 4, 4, 1}));
  const auto f = exact_output_pwl(net);
  EXPECT_LE(max_abs_diff(f, ideal_function(p)), 1e-9);
  EXPECT_EQ(segment_count(f), 32u);
}

TEST(Synthesis, SingleLayerIsOneTriangle) {
  for (Mode mode : {Mode::Add, Mode::Subtract}) {
    const ManifoldParams p{{0.3}, {0.2}, mode};
    const auto f = exact_output_pwl(synthesize_compositional(p));
    ASSERT_EQ(f.size(), 3u);
    const double sign = mode == Mode::Add ? 1.0 : -1.0;
    EXPECT_NEAR(f(0.3), 0.3 + sign * 0.2, 1e-15);
    EXPECT_NEAR(f(0.0), 0.0, 1e-15);
    EXPECT_NEAR(f(1.0), 1.0, 1e-15);
  }
}

TEST(Synthesis, RandomDepthSixMatchesOracleAndStaysBounded) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(rng, 6, true);
    const auto net = synthesize_compositional(p);
    EXPECT_LE(sup_vs_oracle(net, p, 2001), 1e-9);
    for (double x : uniform_grid(2001)) {
      for (const auto& layer : forward(net, x).post) {
        for (double v : layer) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 2.0);
        }
      }
    }
  }
}

TEST(Synthesis, OracleEquivalenceRandomDraws) {
  std::mt19937_64 rng(200);
  std::uniform_int_distribution<std::size_t> depth(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = depth(rng);
    const auto p = random_params(rng, d, trial % 2 == 0);
    const auto net = synthesize_compositional(p);
    EXPECT_LE(sup_vs_oracle(net, p, 2001), 1e-9) << "trial " << trial;
  }
}

TEST(Synthesis, SegmentCountIsTwoToTheDepth) {
  std::mt19937_64 rng(8);
  for (std::size_t depth = 1; depth <= 8; ++depth) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto p = random_params(rng, depth, depth >= 2);
      const auto f = exact_output_pwl(synthesize_compositional(p));
      EXPECT_EQ(segment_count(f), std::size_t{1} << depth) << "depth " << depth;
    }
  }
}

TEST(Synthesis, NoDeadLayers) {
  const auto p = on_manifold({0.3, 0.6, 0.45, 0.7, 0.5}, Mode::Add);
  const auto flags = dying_relu_report(synthesize_compositional(p), uniform_grid(500));
  for (bool f : flags) EXPECT_FALSE(f);
}

TEST(Synthesis, ZeroScalesStillSynthesize) {
  const ManifoldParams p{{0.4, 0.6, 0.5}, {0.0, 0.0, 0.0}, Mode::Add};
  const auto net = synthesize_compositional(p);
  for (double x : uniform_grid(101)) EXPECT_NEAR(net(x), x, 1e-15);
}

TEST(Synthesis, RejectsInvalidParams) {
  EXPECT_THROW(synthesize_compositional({{0.5, 0.5}, {0.1}, Mode::Add}),
               std::invalid_argument);
  EXPECT_THROW(synthesize_compositional({{0.0, 0.5}, {0.1, 0.1}, Mode::Add}),
               std::domain_error);
}

TEST(Synthesis, DualWeightsCarryValues) {
  const std::vector<double> peaks{0.35, 0.6, 0.5, 0.45};
  std::vector<Dual> dp;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    dp.push_back(Dual::variable(peaks[k], k, peaks.size()));
  }
  const auto ds = derive_scales_t<Dual>(dp, Mode::Subtract, Dual(1.0));
  const auto plain = to_dense_net(synthesize_layers<double>(
      peaks, derive_scales(peaks, Mode::Subtract), Mode::Subtract));
  const auto dual = to_dense_net(synthesize_layers<Dual>(dp, ds, Mode::Subtract));
  EXPECT_EQ(plain, dual);
}

}  // namespace
}  // namespace compnet
