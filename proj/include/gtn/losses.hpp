// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. All losses are scalar tensors on the active tape and
// are differentiable with respect to every logit argument; in particular the
// temperature-scaled KL passes gradient to both teacher and student logits.
//
// Inputs are assumed non-degenerate: the decoupled loss takes a log of the
// non-target probability mass, which must stay positive in float.

#pragma once

#include <vector>

#include "gtn/ops.hpp"
#include "gtn/tensor.hpp"

namespace gtn {

struct LossConfig {
  float alpha = 1.0f;        // weight of the KL term
  float temperature = 4.0f;  // softmax temperature T
  float dkd_alpha = 1.0f;    // target-class component weight
  float dkd_beta = 2.0f;     // non-target component weight
};

struct Batch {
  Tensor inputs;
  std::vector<int> labels;
};

// Mean over the batch of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// T^2 * mean_batch KL(softmax(z_t/T) || softmax(z_s/T)), teacher first.
Tensor kd_kl(const Tensor& z_t, const Tensor& z_s, float temperature);

// Teacher conditioning objective:
//   (1/n) sum_i [ CE(z_si) + alpha * KL ] + CE(z_t),  n >= 1.
Tensor loss_ct(const Tensor& z_t, const std::vector<Tensor>& branch_logits,
               const std::vector<int>& labels, const LossConfig& cfg);

// Gate-distribution objective: CE(z_s) - alpha * KL. May be negative.
Tensor loss_phi(const Tensor& z_t, const Tensor& z_s, const std::vector<int>& labels,
                const LossConfig& cfg);

// Distillation objective: CE(z_s) + alpha * KL.
Tensor loss_kd(const Tensor& z_s, const Tensor& z_t, const std::vector<int>& labels,
               const LossConfig& cfg);

// Decoupled distillation: dkd_alpha * TCKD + dkd_beta * NCKD, where TCKD is
// the T^2-scaled binary KL between (target, rest) probability pairs and NCKD
// the T^2-scaled KL between the distributions renormalized over non-target
// classes. Requires at least 2 classes.
Tensor loss_dkd(const Tensor& z_s, const Tensor& z_t, const std::vector<int>& labels,
                const LossConfig& cfg);

}  // namespace gtn
