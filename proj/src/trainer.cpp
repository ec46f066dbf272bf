// SPDX-License-Identifier: Apache-2.0

#include "gtn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gtn {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train config: negative epochs");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0f)) throw std::invalid_argument("train config: learning_rate must be > 0");
  if (momentum < 0.0f || momentum >= 1.0f) throw std::invalid_argument("train config: momentum in [0,1)");
  if (alternation_period < 0 || alternation_period == 1) {
    throw std::invalid_argument("train config: alternation_period must be 0 or >= 2");
  }
  if (branch_count < 0) throw std::invalid_argument("train config: negative branch_count");
  if (!(loss.temperature > 0.0f)) throw std::invalid_argument("train config: temperature must be > 0");
  if (loss.alpha < 0.0f) throw std::invalid_argument("train config: alpha must be >= 0");
}

std::vector<Parameter> BranchedTeacher::theta_parameters() const {
  std::vector<Parameter> out = teacher.parameters();
  if (shared_ops) {
    for (const auto& p : shared_ops->parameters()) out.push_back(p);
  }
  for (const auto& b : branches) {
    for (const auto& p : b.own_parameters()) out.push_back(p);
  }
  return out;
}

BranchedTeacher graft_branches(const TeacherSpec& teacher_spec, const SupernetSpec& pool, int n,
                               TeacherMode mode, const ArchitectureSample& reference,
                               std::mt19937& rng) {
  BranchedTeacher model;
  model.mode = mode;
  model.teacher = TeacherNet(teacher_spec, rng);
  if (mode == TeacherMode::kVanilla || n == 0) {
    model.mode = mode == TeacherMode::kVanilla ? mode : model.mode;
    if (n != 0 && mode == TeacherMode::kVanilla) {
      throw std::invalid_argument("graft_branches: vanilla mode takes no branches");
    }
    if (n == 0) return model;
  }
  model.cut_points = partition_teacher(model.teacher, n);

  SupernetSpec branch_pool = normalize_supernet_spec(pool);
  if (n > branch_pool.depth()) {
    throw std::invalid_argument("graft_branches: " + std::to_string(n) +
                                " branches exceed supernet depth " +
                                std::to_string(branch_pool.depth()));
  }
  if (mode == TeacherMode::kSftn) {
    // Reduce every layer to the reference student's block.
    if (static_cast<int>(reference.size()) != branch_pool.depth()) {
      throw std::invalid_argument("graft_branches: reference sample length " +
                                  std::to_string(reference.size()) + " vs supernet depth " +
                                  std::to_string(branch_pool.depth()));
    }
    SupernetSpec reduced = branch_pool;
    for (int l = 0; l < branch_pool.depth(); ++l) {
      const auto& cands = branch_pool.layers[static_cast<std::size_t>(l)];
      const int j = reference[static_cast<std::size_t>(l)];
      if (j < 0 || j >= static_cast<int>(cands.size())) {
        throw std::out_of_range("graft_branches: reference index " + std::to_string(j) +
                                " out of range at layer " + std::to_string(l));
      }
      reduced.layers[static_cast<std::size_t>(l)] = {cands[static_cast<std::size_t>(j)]};
    }
    branch_pool = reduced;
  }

  model.shared_ops = std::make_shared<Supernet>(branch_pool, rng, "supernet");
  for (int i = 0; i < n; ++i) {
    const int cut = model.cut_points[static_cast<std::size_t>(i)];
    const int in_dim = model.teacher.feature_dim(cut - 1);
    model.branches.push_back(make_branch(*model.shared_ops, /*first_layer=*/cut - 1, in_dim,
                                         teacher_spec.classes, rng,
                                         "branch" + std::to_string(i)));
  }
  return model;
}

namespace {

bool is_phi_iteration(const BranchedTeacher& model, std::int64_t iteration, const TrainConfig& cfg,
                      bool phi_allowed) {
  if (model.mode != TeacherMode::kGtn) return false;
  if (!phi_allowed || cfg.alternation_period == 0 || model.branches.empty()) return false;
  return iteration % cfg.alternation_period == cfg.alternation_period - 1;
}

}  // namespace

StepMetrics gtn_step(BranchedTeacher& model, const Batch& batch, std::int64_t iteration,
                     SgdOptimizer& opt, const TrainConfig& cfg, std::mt19937& rng,
                     bool phi_allowed) {
  if (model.mode == TeacherMode::kVanilla && !model.branches.empty()) {
    throw std::logic_error("gtn_step: vanilla model with branches");
  }
  StepMetrics m;
  m.iteration = iteration;
  m.lr = opt.lr();

  // Fresh gate state every iteration, for every branch.
  for (auto& branch : model.branches) {
    branch.sample_all_gates(rng);
    m.sampled.push_back(branch.active_sample());
  }

  if (is_phi_iteration(model, iteration, cfg, phi_allowed)) {
    m.kind = StepKind::kPhi;
    NoGradGuard ng;
    const auto acts = model.teacher.forward_collect(batch.inputs);
    float total = 0.0f;
    for (std::size_t i = 0; i < model.branches.size(); ++i) {
      const int cut = model.cut_points[i];
      const Tensor z_b = model.branches[i].forward(acts.block_out[static_cast<std::size_t>(cut - 1)]);
      const float reward = loss_phi(acts.logits, z_b, batch.labels, cfg.loss).item();
      m.branch_ce.push_back(cross_entropy(z_b, batch.labels).item());
      m.branch_kl.push_back(kd_kl(acts.logits, z_b, cfg.loss.temperature).item());
      update_phi(model.branches[i], reward, cfg.phi_step_size);
      total += reward;
    }
    m.loss = total / static_cast<float>(model.branches.size());
    return m;
  }

  m.kind = StepKind::kTheta;
  Tape::active().clear();
  const std::vector<Parameter> theta = model.theta_parameters();
  SgdOptimizer::zero_grad(theta);

  const auto acts = model.teacher.forward_collect(batch.inputs);
  Tensor loss;
  if (model.branches.empty()) {
    loss = cross_entropy(acts.logits, batch.labels);
  } else {
    std::vector<Tensor> branch_logits;
    for (std::size_t i = 0; i < model.branches.size(); ++i) {
      const int cut = model.cut_points[i];
      branch_logits.push_back(
          model.branches[i].forward(acts.block_out[static_cast<std::size_t>(cut - 1)]));
    }
    loss = loss_ct(acts.logits, branch_logits, batch.labels, cfg.loss);
    NoGradGuard ng;
    for (const Tensor& z_b : branch_logits) {
      m.branch_ce.push_back(cross_entropy(z_b, batch.labels).item());
      m.branch_kl.push_back(kd_kl(acts.logits, z_b, cfg.loss.temperature).item());
    }
  }
  m.loss = loss.item();
  backward(loss);
  opt.step(theta);
  Tape::active().clear();
  return m;
}

namespace {

PhiSnapshot snapshot_phi(const BranchedTeacher& model) {
  PhiSnapshot snap;
  for (const auto& branch : model.branches) {
    std::vector<std::vector<float>> per_layer;
    for (const auto& layer : branch.layers()) per_layer.push_back(gate_probabilities(layer));
    snap.push_back(std::move(per_layer));
  }
  return snap;
}

void write_curve_record(std::ostream* curve, const StepMetrics& m) {
  if (!curve) return;
  nlohmann::json rec{{"iteration", m.iteration},
                     {"kind", m.kind == StepKind::kTheta ? "theta" : "phi"},
                     {"loss", m.loss},
                     {"lr", m.lr}};
  if (!m.branch_ce.empty()) rec["branch_ce"] = m.branch_ce;
  if (!m.branch_kl.empty()) rec["branch_kl"] = m.branch_kl;
  if (!m.sampled.empty()) rec["sampled"] = m.sampled;
  (*curve) << rec.dump() << "\n";
}

TrainResult train_conditioned(const TrainConfig& cfg, const TeacherSpec& teacher_spec,
                              const SupernetSpec* pool, const ArchitectureSample* reference,
                              TeacherMode mode, const DataSplit& train, std::ostream* curve) {
  cfg.validate();
  if (train.size() < 1) throw std::invalid_argument("train: empty dataset");
  const auto t0 = std::chrono::steady_clock::now();

  std::mt19937 rng(static_cast<std::uint32_t>(cfg.seed ^ (cfg.seed >> 32)));
  static const SupernetSpec kNoPool;
  static const ArchitectureSample kNoRef;
  BranchedTeacher model =
      graft_branches(teacher_spec, pool ? *pool : kNoPool, mode == TeacherMode::kVanilla ? 0 : cfg.branch_count,
                     mode, reference ? *reference : kNoRef, rng);

  SgdOptimizer opt(cfg.learning_rate, cfg.momentum);
  const int n = train.size();
  const std::int64_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_iters = batches_per_epoch * cfg.epochs;

  TrainResult result;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  std::int64_t iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const bool phi_allowed = epoch >= cfg.phi_freeze_epochs;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n - start);
      const Batch batch = take_batch(train, order, start, count);
      const float lr = cfg.schedule == LrSchedule::kCosine
                           ? cosine_lr(cfg.learning_rate, iter, total_iters)
                           : cfg.learning_rate;
      opt.set_lr(lr);
      const StepMetrics m = gtn_step(model, batch, iter, opt, cfg, rng, phi_allowed);
      write_curve_record(curve, m);
      ++iter;
    }
    if (!model.branches.empty()) result.phi_history.push_back(snapshot_phi(model));
  }

  // Branches are discarded; only the bare teacher survives training.
  result.teacher = std::move(model.teacher);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

TrainResult train_gtn(const TrainConfig& cfg, const TeacherSpec& teacher_spec,
                      const SupernetSpec& pool, const DataSplit& train, std::ostream* curve) {
  return train_conditioned(cfg, teacher_spec, &pool, nullptr, TeacherMode::kGtn, train, curve);
}

TrainResult train_sftn(const TrainConfig& cfg, const TeacherSpec& teacher_spec,
                       const SupernetSpec& pool, const ArchitectureSample& reference,
                       const DataSplit& train, std::ostream* curve) {
  return train_conditioned(cfg, teacher_spec, &pool, &reference, TeacherMode::kSftn, train, curve);
}

TrainResult train_vanilla(const TrainConfig& cfg, const TeacherSpec& teacher_spec,
                          const DataSplit& train, std::ostream* curve) {
  return train_conditioned(cfg, teacher_spec, nullptr, nullptr, TeacherMode::kVanilla, train, curve);
}

}  // namespace gtn
