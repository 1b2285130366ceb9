#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "compnet/adam.hpp"
#include "compnet/dense_net.hpp"
#include "compnet/init.hpp"
#include "compnet/manifold.hpp"
#include "compnet/synthesis.hpp"

namespace compnet {
namespace {

DenseNet single_unit(double w, double b) {
  DenseNet net({1, 1});
  net.layers()[0].w[0] = w;
  net.layers()[0].b[0] = b;
  return net;
}

TEST(Forward, SynthesizedSquareAtHalf) {
  const auto p = on_manifold(std::vector<double>(5, 0.5), Mode::Subtract);
  const auto net = synthesize_compositional(p);
  EXPECT_NEAR(net(0.5), 0.25, 1e-15);
}

TEST(Forward, ZeroWeightsGiveFinalBias) {
  DenseNet net(uniform_widths(3));
  net.layers().back().b[0] = -0.75;
  for (double x : {0.0, 0.3, 1.0}) EXPECT_EQ(net(x), -0.75);
}

TEST(Forward, IdentityChain) {
  std::vector<Layer> layers;
  for (int k = 0; k < 4; ++k) layers.push_back({1, 1, {1.0}, {0.0}});
  const DenseNet net({1, 1, 1, 1, 1}, layers);
  for (double x : {0.0, 0.25, 0.9}) EXPECT_EQ(net(x), x);
}

TEST(DenseNet, ShapeErrorsAtConstruction) {
  EXPECT_THROW(DenseNet({2, 1}), std::invalid_argument);
  EXPECT_THROW(DenseNet({1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(DenseNet({1, 2, 1}, {Layer{1, 2, {1, 1}, {0, 0}}}),
               std::invalid_argument);
  EXPECT_THROW(DenseNet({1, 2, 1}, {Layer{1, 2, {1}, {0, 0}}, Layer{2, 1, {1, 1}, {0}}}),
               std::invalid_argument);
}

TEST(DenseNet, FlatParametersRoundTrip) {
  auto net = init_kaiming(uniform_widths(2), 4);
  auto p = net.parameters();
  ASSERT_EQ(p.size(), net.num_parameters());
  ASSERT_EQ(p.size(), 4u + 4u + 16u + 4u + 4u + 1u);
  for (auto& v : p) v *= 2.0;
  net.set_parameters(p);
  EXPECT_EQ(net.parameters(), p);
  EXPECT_THROW(net.set_parameters(std::vector<double>(3)), std::invalid_argument);
}

TEST(Backward, PerfectFitHasZeroGradient) {
  const auto net = init_kaiming(uniform_widths(3), 12);
  const auto xs = uniform_grid(20);
  std::vector<double> ys;
  for (double x : xs) ys.push_back(net(x));
  const auto lg = backward(net, xs, ys);
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.grads.flat()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, SingleUnitAnalytic) {
  const double w = 0.7, b = -0.2, x = 0.6, y = 0.9;
  const auto lg = backward(single_unit(w, b), std::vector<double>{x},
                           std::vector<double>{y});
  const double r = w * x + b - y;
  EXPECT_DOUBLE_EQ(lg.loss, r * r);
  EXPECT_DOUBLE_EQ(lg.grads.dw[0][0], 2 * r * x);
  EXPECT_DOUBLE_EQ(lg.grads.db[0][0], 2 * r);
}

TEST(Backward, RejectsEmptyBatch) {
  EXPECT_THROW(backward(single_unit(1, 0), std::vector<double>{}, std::vector<double>{}),
               std::invalid_argument);
}

// Smallest |pre-activation| over the batch, to keep finite differences away
// from ReLU kinks.
double kink_distance(const DenseNet& net, const std::vector<double>& xs) {
  double d = INFINITY;
  for (double x : xs) {
    for (const auto& layer : forward(net, x).pre) {
      for (double z : layer) d = std::min(d, std::abs(z));
    }
  }
  return d;
}

TEST(Backward, MatchesCentralDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20; ++seed) {
    auto net = init_kaiming(uniform_widths(6), seed);
    std::vector<double> xs(16), ys(16);
    for (auto& x : xs) x = unit(rng);
    for (auto& y : ys) y = unit(rng);
    if (kink_distance(net, xs) < 1e-8) continue;
    ++checked;
    constexpr double kEps = std::numeric_limits<double>::epsilon();

    const auto g = backward(net, xs, ys).grads.flat();
    auto p = net.parameters();
    constexpr double h = 1e-6;
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
      const double fd = (up - down) / (2 * h);
      // Cancellation in up - down leaves about eps * loss / h of noise in fd.
      const double noise = 8 * kEps * std::max(up, down) / h;
      const double scale = std::max(std::abs(fd), std::abs(g[k]));
      EXPECT_LE(std::abs(fd - g[k]), 1e-5 * scale + noise)
          << "seed " << seed << " k " << k;
    }
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p{0.5, -1.0, 2.0};
  const auto before = p;
  AdamState st(p.size(), {});
  for (int k = 0; k < 5; ++k) adam_step(st, p, std::vector<double>(3, 0.0));
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0, 0.0, 0.0};
  AdamState st(p.size(), {});
  adam_step(st, p, std::vector<double>{3.0, -0.01, 250.0});
  EXPECT_NEAR(p[0], -1e-3, 1e-9);
  EXPECT_NEAR(p[1], 1e-3, 1e-9);
  EXPECT_NEAR(p[2], -1e-3, 1e-9);
}

TEST(Adam, QuadraticBowlDescends) {
  const std::vector<double> c{1.0, 4.0, 0.25};
  std::vector<double> p{1.0, -2.0, 0.5};
  auto loss = [&] {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += c[k] * p[k] * p[k];
    return s;
  };
  AdamState st(p.size(), {});
  double prev = loss();
  for (int step = 0; step < 100; ++step) {
    std::vector<double> g(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) g[k] = 2 * c[k] * p[k];
    adam_step(st, p, g);
    const double now = loss();
    if (step >= 10) {
      EXPECT_LT(now, prev) << "step " << step;
    }
    prev = now;
  }
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<double> p(3);
  AdamState st(2, {});
  EXPECT_THROW(adam_step(st, p, std::vector<double>(3)), std::invalid_argument);
}

TEST(InitKaiming, BoundsAndDeterminism) {
  const std::vector<std::size_t> small{1, 4, 1};
  const auto a = init_kaiming(small, 17);
  EXPECT_EQ(a, init_kaiming(small, 17));
  EXPECT_NE(a, init_kaiming(small, 18));
  for (double w : a.layers()[0].w) EXPECT_LE(std::abs(w), 1.0);
  for (double w : a.layers()[1].w) EXPECT_LE(std::abs(w), 0.5);
  for (double b : a.layers()[1].b) EXPECT_LE(std::abs(b), 0.5);
}

TEST(InitRaai, ShapeMatchesKaiming) {
  const auto widths = uniform_widths(5);
  const auto r = init_raai(widths, 3);
  const auto k = init_kaiming(widths, 3);
  EXPECT_EQ(r.widths(), k.widths());
  EXPECT_EQ(r.num_parameters(), k.num_parameters());
  EXPECT_EQ(r, init_raai(widths, 3));
  EXPECT_NE(r, init_raai(widths, 4));
}

TEST(InitRaai, PositiveBiasNeuronPerLayer) {
  // A bias is positive when it is the Beta(2,1) coordinate (probability
  // 1/(fan_in+1)) or a positive normal draw (probability 1/2 otherwise).
  const std::vector<std::size_t> widths{1, 4, 4, 1};
  double expected = 1.0;
  for (std::size_t k = 1; k + 1 < widths.size(); ++k) {
    const double special = 1.0 / static_cast<double>(widths[k - 1] + 1);
    const double nonpositive = (1.0 - special) * 0.5;
    expected *= 1.0 - std::pow(nonpositive, static_cast<double>(widths[k]));
  }
  constexpr int kSeeds = 1000;
  int hits = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto net = init_raai(widths, static_cast<std::uint64_t>(seed));
    bool all = true;
    for (std::size_t k = 0; k + 1 < net.layers().size(); ++k) {
      const auto& b = net.layers()[k].b;
      all = all && std::any_of(b.begin(), b.end(), [](double v) { return v > 0; });
    }
    hits += all;
  }
  const double rate = static_cast<double>(hits) / kSeeds;
  const double sd = std::sqrt(expected * (1 - expected) / kSeeds);
  EXPECT_GT(expected, 0.95);
  EXPECT_NEAR(rate, expected, 4 * sd);
}

TEST(ExactOutputPwl, DeadLayerIsConstant) {
  auto net = init_kaiming(uniform_widths(3), 1);
  for (auto& b : net.layers()[1].b) b = -100.0;
  const auto f = exact_output_pwl(net);
  EXPECT_EQ(segment_count(f), 1u);
  const auto flags = dying_relu_report(net, uniform_grid(500));
  EXPECT_TRUE(flags[1]);
}

TEST(ExactOutputPwl, MatchesForwardPass) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = init_kaiming(uniform_widths(5), seed);
    const auto f = exact_output_pwl(net);
    for (double x : uniform_grid(1001)) EXPECT_NEAR(f(x), net(x), 1e-12);
  }
}

TEST(ExactOutputPwl, KaimingDepthFiveFallsShortOfFullBends) {
  std::vector<std::size_t> counts;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    counts.push_back(segment_count(exact_output_pwl(init_kaiming(uniform_widths(5), seed))));
  }
  std::sort(counts.begin(), counts.end());
  EXPECT_LT(counts[counts.size() / 2], 32u);
}

TEST(DyingRelu, LargeNegativeBiasesFlagEverything) {
  auto net = init_kaiming(uniform_widths(4), 2);
  for (auto& l : net.layers()) {
    for (auto& b : l.b) b = -10.0;
  }
  const auto flags = dying_relu_report(net, uniform_grid(500));
  ASSERT_EQ(flags.size(), 4u);
  for (bool f : flags) EXPECT_TRUE(f);
}

}  // namespace
}  // namespace compnet
