// SPDX-License-Identifier: Apache-2.0
//
// Differentiable architecture search over the candidate pool: a standalone
// gated supernet (no teacher attached) trained by alternating parameter steps
// on the sampled path with score-function gate steps rewarded by validation
// cross-entropy. The final architecture is the per-layer argmax of the gate
// distribution.

#pragma once

#include <array>
#include <cstdint>

#include "gtn/dataset.hpp"
#include "gtn/trainer.hpp"

namespace gtn {

struct SearchBudget {
  int max_searchable_layers = 1;  // supernet truncated to its first layers
  int epochs = 30;
  std::uint64_t seed = 0;
};

ArchitectureSample search(const SupernetSpec& spec, const Dataset& data,
                          const SearchBudget& budget, const TrainConfig& cfg);

// Three searches with decreasing layer budgets (large, medium, small).
std::array<ArchitectureSample, 3> budget_variants(const SupernetSpec& spec, const Dataset& data,
                                                  const std::array<int, 3>& budgets,
                                                  const TrainConfig& cfg, std::uint64_t seed);

}  // namespace gtn
