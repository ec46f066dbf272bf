// SPDX-License-Identifier: Apache-2.0

#include "gtn/optim.hpp"

#include <cmath>

namespace gtn {

void SgdOptimizer::step(const std::vector<Parameter>& params) {
  for (const auto& p : params) {
    const auto& g = p.tensor.grad();
    if (g.empty()) continue;
    auto& val = p.tensor.values();
    if (momentum_ != 0.0f) {
      auto& v = velocity_[p.stable_id()];
      if (v.empty()) v.assign(val.size(), 0.0f);
      for (std::size_t i = 0; i < val.size(); ++i) {
        v[i] = momentum_ * v[i] + g[i];
        val[i] -= lr_ * v[i];
      }
    } else {
      for (std::size_t i = 0; i < val.size(); ++i) val[i] -= lr_ * g[i];
    }
  }
  ++steps_;
}

void SgdOptimizer::zero_grad(const std::vector<Parameter>& params) {
  for (const auto& p : params) p.tensor.zero_grad();
}

float cosine_lr(float base_lr, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return base_lr;
  const double ratio = static_cast<double>(step) / static_cast<double>(total_steps);
  return static_cast<float>(base_lr * 0.5 * (1.0 + std::cos(ratio * 3.14159265358979323846)));
}

}  // namespace gtn
