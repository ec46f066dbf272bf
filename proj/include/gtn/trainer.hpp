// SPDX-License-Identifier: Apache-2.0
//
// Teacher-training regimes. The conditioned modes graft student branches on
// top of teacher blocks and train against the conditioning objective; the
// generic mode resamples each branch's architecture from the shared supernet
// every iteration and alternates parameter steps with gate-distribution
// steps, while the specialized mode keeps one fixed reference architecture
// and updates parameters every iteration.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "gtn/dataset.hpp"
#include "gtn/losses.hpp"
#include "gtn/optim.hpp"
#include "gtn/supernet.hpp"

namespace gtn {

enum class TeacherMode { kVanilla, kSftn, kGtn };

enum class LrSchedule { kCosine, kConstant };

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  LrSchedule schedule = LrSchedule::kCosine;
  // Gate-distribution steps run on iterations where i % period == period - 1;
  // 0 disables them (every iteration is a parameter step).
  int alternation_period = 2;
  int phi_freeze_epochs = 0;
  float phi_step_size = 0.1f;
  int branch_count = 0;  // n
  LossConfig loss;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BranchedTeacher {
  TeacherNet teacher;
  std::shared_ptr<Supernet> shared_ops;  // null in vanilla mode
  std::vector<int> cut_points;           // branch i attaches after this many blocks
  std::vector<PathNet> branches;
  TeacherMode mode = TeacherMode::kVanilla;

  // Teacher + shared candidates + branch adapters/heads.
  std::vector<Parameter> theta_parameters() const;
};

// Builds the branched model. In generic mode branches hold the full candidate
// sets of pool layers [i-1, depth); in specialized mode each layer's set is
// reduced to the reference student's block, so branches stay gate-compatible
// but have exactly one choice. reference is ignored for the other modes.
BranchedTeacher graft_branches(const TeacherSpec& teacher, const SupernetSpec& pool, int n,
                               TeacherMode mode, const ArchitectureSample& reference,
                               std::mt19937& rng);

enum class StepKind { kTheta, kPhi };

struct StepMetrics {
  std::int64_t iteration = 0;
  StepKind kind = StepKind::kTheta;
  float loss = 0.0f;
  float lr = 0.0f;
  std::vector<float> branch_ce, branch_kl;
  std::vector<ArchitectureSample> sampled;
};

// One iteration of the conditioning loop: a parameter step descending the
// conditioning loss on even iterations, a gate-distribution step on the
// alternation iterations (generic mode only).
StepMetrics gtn_step(BranchedTeacher& model, const Batch& batch, std::int64_t iteration,
                     SgdOptimizer& opt, const TrainConfig& cfg, std::mt19937& rng,
                     bool phi_allowed = true);

// Gate probabilities per branch per layer at one point in training.
using PhiSnapshot = std::vector<std::vector<std::vector<float>>>;

struct TrainResult {
  TeacherNet teacher;  // branches discarded
  std::vector<PhiSnapshot> phi_history;  // one snapshot per epoch
  double seconds = 0.0;
};

TrainResult train_gtn(const TrainConfig& cfg, const TeacherSpec& teacher_spec,
                      const SupernetSpec& pool, const DataSplit& train,
                      std::ostream* curve = nullptr);

TrainResult train_sftn(const TrainConfig& cfg, const TeacherSpec& teacher_spec,
                       const SupernetSpec& pool, const ArchitectureSample& reference,
                       const DataSplit& train, std::ostream* curve = nullptr);

TrainResult train_vanilla(const TrainConfig& cfg, const TeacherSpec& teacher_spec,
                          const DataSplit& train, std::ostream* curve = nullptr);

}  // namespace gtn
