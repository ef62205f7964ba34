#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "tgn_social/tensor.hpp"

namespace tgn_social {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Moments for the parameters named in the gradient set it was built from.
struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;
};

inline AdamState make_adam_state(const ParamSet& grads) { return {grads.zeros_like(), grads.zeros_like(), 0}; }

/// Adam with L2-coupled weight decay (g += wd * theta before the moment
/// update) and bias-corrected moments. Only parameters present in `grads`
/// are touched.
inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Tensor& theta = params.at(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    if (theta.shape() != g.shape() || m.shape() != g.shape()) {
      throw std::invalid_argument("adam_step: shape mismatch for " + name + ": " + theta.shape().str() + " vs " +
                                  g.shape().str());
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i] + cfg.weight_decay * theta[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace tgn_social
