// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gtn/tensor.hpp"

namespace gtn {

// Momentum SGD over named parameters. Only parameters holding a gradient are
// stepped, so after zero_grad + backward the update set is exactly the set of
// gradient-touched parameters.
class SgdOptimizer {
 public:
  SgdOptimizer(float lr, float momentum) : lr_(lr), momentum_(momentum) {}

  float lr() const { return lr_; }
  void set_lr(float lr) { lr_ = lr; }

  // v = momentum * v + g;  p -= lr * v
  void step(const std::vector<Parameter>& params);

  static void zero_grad(const std::vector<Parameter>& params);

  std::int64_t step_count() const { return steps_; }

 private:
  float lr_;
  float momentum_;
  std::int64_t steps_ = 0;
  std::unordered_map<std::uint64_t, std::vector<float>> velocity_;
};

// lr0 * (1 + cos(pi * t / t_max)) / 2
float cosine_lr(float base_lr, std::int64_t step, std::int64_t total_steps);

}  // namespace gtn
