#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace compnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators for a flat parameter vector.
struct AdamState {
  AdamConfig cfg;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig config)
      : cfg(config), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected ADAM update in place.
inline void adam_step(AdamState& st, std::span<double> params,
                      std::span<const double> grads) {
  if (params.size() != st.m.size() || grads.size() != st.m.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++st.step;
  const auto& c = st.cfg;
  const double t = static_cast<double>(st.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    st.m[k] = c.beta1 * st.m[k] + (1.0 - c.beta1) * g;
    st.v[k] = c.beta2 * st.v[k] + (1.0 - c.beta2) * g * g;
    const double m_hat = st.m[k] / corr1;
    const double v_hat = st.v[k] / corr2;
    params[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace compnet
