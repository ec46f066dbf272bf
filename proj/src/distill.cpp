// SPDX-License-Identifier: Apache-2.0

#include "gtn/distill.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

namespace gtn {

KdMethod kd_method_from_name(const std::string& name) {
  if (name == "none") return KdMethod::kNone;
  if (name == "vanilla") return KdMethod::kVanilla;
  if (name == "dkd") return KdMethod::kDkd;
  throw std::invalid_argument("unknown kd method '" + name + "'");
}

const char* kd_method_name(KdMethod m) {
  switch (m) {
    case KdMethod::kNone: return "none";
    case KdMethod::kVanilla: return "vanilla";
    case KdMethod::kDkd: return "dkd";
  }
  return "?";
}

namespace {

PathNet build_student(const DistillJob& job, const Dataset& data, std::mt19937& rng) {
  if (!job.explicit_blocks.empty()) {
    SupernetSpec spec;
    spec.feature_dim = job.explicit_blocks.front().out_dim;
    ArchitectureSample sample;
    for (const auto& b : job.explicit_blocks) {
      spec.layers.push_back({b});
      sample.push_back(0);
    }
    Supernet unused;
    return derive_student(unused, spec, sample, /*fresh=*/true, data.input_dim(), data.classes,
                          rng, "student");
  }
  Supernet unused;
  return derive_student(unused, job.pool, job.student_arch, /*fresh=*/true, data.input_dim(),
                        data.classes, rng, "student");
}

template <typename Net>
double evaluate_net(const Net& net, const DataSplit& split) {
  if (split.size() == 0) throw std::invalid_argument("evaluate: empty evaluation set");
  NoGradGuard ng;
  std::vector<int> order(static_cast<std::size_t>(split.size()));
  std::iota(order.begin(), order.end(), 0);
  const int chunk = 256;
  int correct = 0;
  for (int start = 0; start < split.size(); start += chunk) {
    const int count = std::min(chunk, split.size() - start);
    const Batch b = take_batch(split, order, start, count);
    const Tensor logits = net.forward(b.inputs);
    const auto& v = logits.values();
    const int classes = logits.dim(1);
    for (int i = 0; i < count; ++i) {
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (v[i * classes + c] > v[i * classes + best]) best = c;
      }
      if (best == b.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace

double evaluate(const PathNet& net, const DataSplit& split) { return evaluate_net(net, split); }
double evaluate(const TeacherNet& net, const DataSplit& split) { return evaluate_net(net, split); }

double delta_vs_vanilla(double acc_method_pct, double acc_vanilla_pct) {
  return acc_method_pct - acc_vanilla_pct;
}

DistillResult distill(const DistillJob& job, const Dataset& data) {
  job.cfg.validate();
  if (job.method != KdMethod::kNone) {
    if (!job.teacher) throw std::invalid_argument("distill: teacher required for kd method");
    if (job.teacher->classes() != data.classes) {
      throw std::invalid_argument("distill: teacher trained for " +
                                  std::to_string(job.teacher->classes()) + " classes, dataset has " +
                                  std::to_string(data.classes));
    }
  }
  const auto t0 = std::chrono::steady_clock::now();

  std::mt19937 rng(static_cast<std::uint32_t>(job.cfg.seed ^ (job.cfg.seed >> 32)));
  DistillResult result;
  result.student = build_student(job, data, rng);

  const std::vector<Parameter> params = result.student.parameters();
  SgdOptimizer opt(job.cfg.learning_rate, job.cfg.momentum);
  const DataSplit& train = data.train;
  const int n = train.size();
  if (n < 1) throw std::invalid_argument("distill: empty training split");
  const std::int64_t batches_per_epoch = (n + job.cfg.batch_size - 1) / job.cfg.batch_size;
  const std::int64_t total_iters = batches_per_epoch * job.cfg.epochs;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  std::int64_t iter = 0;
  for (int epoch = 0; epoch < job.cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += job.cfg.batch_size) {
      const int count = std::min(job.cfg.batch_size, n - start);
      const Batch batch = take_batch(train, order, start, count);

      Tensor teacher_logits;
      if (job.method != KdMethod::kNone) {
        NoGradGuard ng;  // teacher stays off the tape
        teacher_logits = job.teacher->forward(batch.inputs);
      }

      Tape::active().clear();
      SgdOptimizer::zero_grad(params);
      const Tensor student_logits = result.student.forward(batch.inputs);
      Tensor loss;
      switch (job.method) {
        case KdMethod::kNone:
          loss = cross_entropy(student_logits, batch.labels);
          break;
        case KdMethod::kVanilla:
          loss = loss_kd(student_logits, teacher_logits, batch.labels, job.cfg.loss);
          break;
        case KdMethod::kDkd:
          loss = loss_dkd(student_logits, teacher_logits, batch.labels, job.cfg.loss);
          break;
      }
      backward(loss);
      opt.set_lr(job.cfg.schedule == LrSchedule::kCosine
                     ? cosine_lr(job.cfg.learning_rate, iter, total_iters)
                     : job.cfg.learning_rate);
      opt.step(params);
      Tape::active().clear();
      ++iter;
    }
  }

  result.test_accuracy = evaluate(result.student, data.test);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace gtn
