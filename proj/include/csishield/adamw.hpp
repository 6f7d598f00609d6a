#pragma once

#include <cmath>
#include <vector>

#include "csishield/nn.hpp"

namespace csishield {

struct AdamWConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment state for one parameter tensor.
struct AdamWState {
  Vector m;
  Vector v;
  long t = 0;
};

/// One decoupled-weight-decay update: decay is applied to the parameter
/// directly, not folded into the gradient.
inline void adamw_step(std::span<double> param, std::span<const double> grad, AdamWState& state,
                       const AdamWConfig& cfg) {
  if (param.size() != grad.size()) throw ShapeMismatch("adamw_step: param/grad size");
  if (state.m.size() != param.size()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    param[i] -= cfg.lr * cfg.weight_decay * param[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

/// Optimizer over a fixed parameter registry; consumes ParamTensor::g.
class AdamW {
 public:
  AdamW(std::vector<ParamTensor*> params, AdamWConfig cfg)
      : params_(std::move(params)), cfg_(cfg), states_(params_.size()) {}

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i)
      adamw_step(std::span<double>(params_[i]->v.storage()),
                 std::span<const double>(params_[i]->g.storage()), states_[i], cfg_);
  }

  void zero_grad() {
    for (ParamTensor* p : params_) p->zero_grad();
  }

  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<ParamTensor*> params_;
  AdamWConfig cfg_;
  std::vector<AdamWState> states_;
};

}  // namespace csishield
