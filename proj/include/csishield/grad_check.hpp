#pragma once

#include <algorithm>
#include <functional>
#include <span>

#include "csishield/nn.hpp"

namespace csishield {

/// Central-difference gradient verification. `loss` recomputes the scalar
/// objective from current parameter values; `compute_grads` zeroes and fills
/// every ParamTensor::g analytically. Returns the maximum relative error
///   |analytic - numeric| / max(floor, |analytic|, |numeric|)
/// over all parameter elements; the floor keeps near-zero gradients from
/// blowing up the ratio where central differences are dominated by rounding.
inline double grad_check(const std::function<double()>& loss,
                         const std::function<void()>& compute_grads,
                         std::span<ParamTensor* const> params, double eps = 1e-4,
                         double floor = 1e-3) {
  compute_grads();
  std::vector<Vector> analytic;
  analytic.reserve(params.size());
  for (const ParamTensor* p : params) analytic.push_back(p->g.storage());

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = params[pi]->v.storage();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss();
      values[i] = saved - eps;
      const double down = loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max({floor, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace csishield
