#pragma once

// Plain fully connected ReLU network on a scalar input: affine + ReLU for
// every hidden layer, affine only for the output layer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "compnet/pwl.hpp"

namespace compnet {

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // row-major, out x in
  std::vector<double> b;  // out

  double& weight(std::size_t row, std::size_t col) { return w[row * in + col]; }
  double weight(std::size_t row, std::size_t col) const {
    return w[row * in + col];
  }

  friend bool operator==(const Layer&, const Layer&) = default;
};

class DenseNet {
 public:
  DenseNet() = default;

  /// All-zero network with the given widths.
  explicit DenseNet(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    check_widths();
    for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
      const auto in = widths_[k];
      const auto out = widths_[k + 1];
      layers_.push_back({in, out, std::vector<double>(in * out, 0.0),
                         std::vector<double>(out, 0.0)});
    }
  }

  DenseNet(std::vector<std::size_t> widths, std::vector<Layer> layers)
      : widths_(std::move(widths)), layers_(std::move(layers)) {
    check_widths();
    if (layers_.size() + 1 != widths_.size()) {
      throw std::invalid_argument("DenseNet: layer count does not match widths");
    }
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.in != widths_[k] || l.out != widths_[k + 1] ||
          l.w.size() != l.in * l.out || l.b.size() != l.out) {
        throw std::invalid_argument("DenseNet: layer " + std::to_string(k) +
                                    " shape mismatch");
      }
    }
  }

  const std::vector<std::size_t>& widths() const { return widths_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t num_hidden() const { return layers_.size() - 1; }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
  }

  /// Flat parameter vector: per layer, weights then biases.
  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(num_parameters());
    for (const auto& l : layers_) {
      p.insert(p.end(), l.w.begin(), l.w.end());
      p.insert(p.end(), l.b.begin(), l.b.end());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != num_parameters()) {
      throw std::invalid_argument("DenseNet: parameter vector size mismatch");
    }
    auto it = p.begin();
    for (auto& l : layers_) {
      std::copy_n(it, l.w.size(), l.w.begin());
      it += static_cast<std::ptrdiff_t>(l.w.size());
      std::copy_n(it, l.b.size(), l.b.begin());
      it += static_cast<std::ptrdiff_t>(l.b.size());
    }
  }

  double operator()(double x) const;

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  void check_widths() const {
    if (widths_.size() < 2 || widths_.front() != 1 || widths_.back() != 1) {
      throw std::invalid_argument("DenseNet widths must start and end with 1");
    }
    for (auto w : widths_) {
      if (w == 0) throw std::invalid_argument("DenseNet: zero-width layer");
    }
  }

  std::vector<std::size_t> widths_;
  std::vector<Layer> layers_;
};

/// Per-layer values from one forward pass. pre[k] / post[k] belong to
/// hidden layer k; the output layer has no ReLU.
struct Activations {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  double output = 0.0;
};

inline Activations forward(const DenseNet& net, double x) {
  Activations act;
  const auto& layers = net.layers();
  std::vector<double> h{x};
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    std::vector<double> z(l.out);
    for (std::size_t r = 0; r < l.out; ++r) {
      double acc = l.b[r];
      for (std::size_t c = 0; c < l.in; ++c) acc += l.w[r * l.in + c] * h[c];
      z[r] = acc;
    }
    if (k + 1 == layers.size()) {
      act.output = z[0];
      break;
    }
    std::vector<double> a(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) a[r] = z[r] > 0.0 ? z[r] : 0.0;
    act.pre.push_back(std::move(z));
    act.post.push_back(a);
    h = std::move(a);
  }
  return act;
}

inline double DenseNet::operator()(double x) const {
  return forward(*this, x).output;
}

/// Shape-congruent with DenseNet parameters, in the same flat order.
struct Gradients {
  std::vector<std::vector<double>> dw;
  std::vector<std::vector<double>> db;

  std::vector<double> flat() const {
    std::vector<double> g;
    for (std::size_t k = 0; k < dw.size(); ++k) {
      g.insert(g.end(), dw[k].begin(), dw[k].end());
      g.insert(g.end(), db[k].begin(), db[k].end());
    }
    return g;
  }
};

struct LossGrad {
  double loss = 0.0;
  Gradients grads;
};

inline double mse(const DenseNet& net, std::span<const double> xs,
                  std::span<const double> ys) {
  double sum = 0.0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const double e = net(xs[n]) - ys[n];
    sum += e * e;
  }
  return sum / static_cast<double>(xs.size());
}

/// Mean squared error over the batch and its exact gradient. The ReLU
/// derivative at 0 is taken as 0.
inline LossGrad backward(const DenseNet& net, std::span<const double> xs,
                         std::span<const double> ys) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw std::invalid_argument("backward: empty or mismatched batch");
  }
  const auto& layers = net.layers();
  const std::size_t nl = layers.size();
  LossGrad out;
  out.grads.dw.resize(nl);
  out.grads.db.resize(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    out.grads.dw[k].assign(layers[k].w.size(), 0.0);
    out.grads.db[k].assign(layers[k].b.size(), 0.0);
  }

  const double inv_n = 1.0 / static_cast<double>(xs.size());
  // Per-sample workspace, reused across the batch. post[0] is the input.
  std::vector<std::vector<double>> pre(nl);
  std::vector<std::vector<double>> post(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    pre[k].resize(layers[k].out);
    post[k].resize(layers[k].in);
  }
  std::vector<double> delta;
  std::vector<double> prev_delta;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    post[0][0] = xs[n];
    for (std::size_t k = 0; k < nl; ++k) {
      const auto& l = layers[k];
      for (std::size_t r = 0; r < l.out; ++r) {
        double acc = l.b[r];
        const double* row = &l.w[r * l.in];
        for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * post[k][c];
        pre[k][r] = acc;
        if (k + 1 < nl) post[k + 1][r] = acc > 0.0 ? acc : 0.0;
      }
    }
    const double err = pre[nl - 1][0] - ys[n];
    out.loss += err * err;

    delta.assign(1, 2.0 * err * inv_n);
    for (std::size_t k = nl; k-- > 0;) {
      const auto& l = layers[k];
      auto& gw = out.grads.dw[k];
      auto& gb = out.grads.db[k];
      const auto& input = post[k];
      for (std::size_t r = 0; r < l.out; ++r) {
        gb[r] += delta[r];
        for (std::size_t c = 0; c < l.in; ++c) gw[r * l.in + c] += delta[r] * input[c];
      }
      if (k == 0) break;
      prev_delta.assign(l.in, 0.0);
      const auto& z = pre[k - 1];
      for (std::size_t c = 0; c < l.in; ++c) {
        if (!(z[c] > 0.0)) continue;
        double s = 0.0;
        for (std::size_t r = 0; r < l.out; ++r) s += l.w[r * l.in + c] * delta[r];
        prev_delta[c] = s;
      }
      std::swap(delta, prev_delta);
    }
  }
  out.loss *= inv_n;
  return out;
}

/// Exact network function on [0,1] per hidden layer: pre-activation PWLs.
/// The last entry of the result is the output layer's (single) PWL.
inline std::vector<std::vector<PwlFunction>> layer_pwls(const DenseNet& net) {
  std::vector<std::vector<PwlFunction>> pre_all;
  std::vector<PwlFunction> h{PwlFunction::identity()};
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    std::vector<PwlFunction> z;
    z.reserve(l.out);
    std::vector<Term> terms(l.in);
    for (std::size_t r = 0; r < l.out; ++r) {
      for (std::size_t c = 0; c < l.in; ++c) terms[c] = {l.w[r * l.in + c], &h[c]};
      z.push_back(affine_combine(terms, l.b[r]));
    }
    if (k + 1 < layers.size()) {
      std::vector<PwlFunction> a;
      a.reserve(z.size());
      for (const auto& f : z) a.push_back(relu_clip(f));
      h = std::move(a);
    }
    pre_all.push_back(std::move(z));
  }
  return pre_all;
}

inline PwlFunction exact_output_pwl(const DenseNet& net) {
  return std::move(layer_pwls(net).back().front());
}

/// One flag per hidden layer: true when every neuron's post-ReLU output is
/// the same at all grid points, so the network is constant from there on.
inline std::vector<bool> dying_relu_report(const DenseNet& net,
                                           std::span<const double> grid) {
  const std::size_t nh = net.num_hidden();
  std::vector<bool> dead(nh, true);
  if (grid.empty()) return dead;
  const auto first = forward(net, grid.front());
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const auto act = forward(net, grid[g]);
    for (std::size_t k = 0; k < nh; ++k) {
      if (dead[k] && act.post[k] != first.post[k]) dead[k] = false;
    }
  }
  return dead;
}

inline std::vector<double> uniform_grid(std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return g;
}

}  // namespace compnet
