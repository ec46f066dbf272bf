// SPDX-License-Identifier: Apache-2.0
//
// The distillation stage: a freshly initialized student from the pool is
// trained under a frozen teacher's logits and evaluated on held-out data.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "gtn/dataset.hpp"
#include "gtn/supernet.hpp"
#include "gtn/trainer.hpp"

namespace gtn {

enum class KdMethod { kNone, kVanilla, kDkd };

KdMethod kd_method_from_name(const std::string& name);
const char* kd_method_name(KdMethod m);

struct DistillJob {
  const TeacherNet* teacher = nullptr;  // required unless method == kNone
  KdMethod method = KdMethod::kVanilla;
  // Student architecture: candidate indices into `pool`, or explicit blocks.
  ArchitectureSample student_arch;
  SupernetSpec pool;
  std::vector<BlockSpec> explicit_blocks;
  TrainConfig cfg;
};

struct DistillResult {
  PathNet student;
  double test_accuracy = 0.0;  // in [0, 1]
  double seconds = 0.0;
};

// Trains the student with the teacher in inference-only mode (the teacher
// receives no gradient and its parameters never change).
DistillResult distill(const DistillJob& job, const Dataset& data);

// Fraction of argmax-correct predictions, deterministic (ties -> lowest index).
double evaluate(const PathNet& net, const DataSplit& split);
double evaluate(const TeacherNet& net, const DataSplit& split);

// Percentage-point improvement over the vanilla-KD accuracy (inputs in %).
double delta_vs_vanilla(double acc_method_pct, double acc_vanilla_pct);

}  // namespace gtn
