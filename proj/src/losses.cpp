// SPDX-License-Identifier: Apache-2.0

#include "gtn/losses.hpp"

#include <stdexcept>
#include <string>

namespace gtn {

namespace {

void check_logits(const Tensor& logits, const std::vector<int>& labels, const char* op) {
  if (logits.rank() != 2) {
    throw ShapeError(std::string(op) + ": logits must be batch x classes, got " +
                     shape_str(logits.shape()));
  }
  if (static_cast<int>(labels.size()) != logits.dim(0)) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.dim(0)) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= logits.dim(1)) {
      throw std::out_of_range(std::string(op) + ": label " + std::to_string(y) +
                              " out of range for " + std::to_string(logits.dim(1)) + " classes");
    }
  }
}

void check_pair(const Tensor& z_t, const Tensor& z_s, float temperature, const char* op) {
  if (z_t.shape() != z_s.shape()) {
    throw ShapeError(std::string(op) + ": teacher " + shape_str(z_t.shape()) + " vs student " +
                     shape_str(z_s.shape()));
  }
  if (!(temperature > 0.0f)) {
    throw std::invalid_argument(std::string(op) + ": temperature must be positive");
  }
}

// Logits with -1e9 added at each row's label, pushing the target class out of
// the softmax support.
Tensor mask_target(const Tensor& scaled_logits, const std::vector<int>& labels) {
  const int m = scaled_logits.dim(0), n = scaled_logits.dim(1);
  std::vector<float> mask(static_cast<std::size_t>(m) * n, 0.0f);
  for (int i = 0; i < m; ++i) mask[i * n + labels[static_cast<std::size_t>(i)]] = -1e9f;
  return add(scaled_logits, Tensor({m, n}, std::move(mask)));
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  check_logits(logits, labels, "cross_entropy");
  return scale(mean_all(gather_cols(log_softmax(logits), labels)), -1.0f);
}

Tensor kd_kl(const Tensor& z_t, const Tensor& z_s, float temperature) {
  check_pair(z_t, z_s, temperature, "kd_kl");
  const float inv_t = 1.0f / temperature;
  Tensor lt = log_softmax(scale(z_t, inv_t));
  Tensor ls = log_softmax(scale(z_s, inv_t));
  Tensor per_row = sum_cols(mul(exp(lt), sub(lt, ls)));
  return scale(mean_all(per_row), temperature * temperature);
}

Tensor loss_ct(const Tensor& z_t, const std::vector<Tensor>& branch_logits,
               const std::vector<int>& labels, const LossConfig& cfg) {
  if (branch_logits.empty()) throw std::invalid_argument("loss_ct: no student branches");
  Tensor acc;
  for (const Tensor& z_s : branch_logits) {
    Tensor term = cross_entropy(z_s, labels);
    if (cfg.alpha != 0.0f) term = add(term, scale(kd_kl(z_t, z_s, cfg.temperature), cfg.alpha));
    acc = acc.defined() ? add(acc, term) : term;
  }
  acc = scale(acc, 1.0f / static_cast<float>(branch_logits.size()));
  return add(acc, cross_entropy(z_t, labels));
}

Tensor loss_phi(const Tensor& z_t, const Tensor& z_s, const std::vector<int>& labels,
                const LossConfig& cfg) {
  Tensor ce = cross_entropy(z_s, labels);
  if (cfg.alpha == 0.0f) return ce;
  return sub(ce, scale(kd_kl(z_t, z_s, cfg.temperature), cfg.alpha));
}

Tensor loss_kd(const Tensor& z_s, const Tensor& z_t, const std::vector<int>& labels,
               const LossConfig& cfg) {
  Tensor ce = cross_entropy(z_s, labels);
  if (cfg.alpha == 0.0f) return ce;
  return add(ce, scale(kd_kl(z_t, z_s, cfg.temperature), cfg.alpha));
}

Tensor loss_dkd(const Tensor& z_s, const Tensor& z_t, const std::vector<int>& labels,
                const LossConfig& cfg) {
  check_logits(z_s, labels, "loss_dkd");
  check_pair(z_t, z_s, cfg.temperature, "loss_dkd");
  if (z_s.dim(1) < 2) throw std::invalid_argument("loss_dkd: needs at least 2 classes");

  const float T = cfg.temperature;
  const float t2 = T * T;
  const int m = z_s.dim(0);
  Tensor zt = scale(z_t, 1.0f / T);
  Tensor zs = scale(z_s, 1.0f / T);
  Tensor lt = log_softmax(zt);
  Tensor ls = log_softmax(zs);

  // Binary (target vs rest) KL.
  Tensor pt_y = gather_cols(exp(lt), labels);
  Tensor ps_y = gather_cols(exp(ls), labels);
  Tensor lt_y = gather_cols(lt, labels);
  Tensor ls_y = gather_cols(ls, labels);
  Tensor ones = Tensor::constant({m}, 1.0f);
  Tensor qt = sub(ones, pt_y);
  Tensor qs = sub(ones, ps_y);
  Tensor binary_row = add(mul(pt_y, sub(lt_y, ls_y)), mul(qt, sub(log(qt), log(qs))));
  Tensor tckd = scale(mean_all(binary_row), t2);

  // KL over the non-target classes, renormalized by masking the target.
  Tensor ltn = log_softmax(mask_target(zt, labels));
  Tensor lsn = log_softmax(mask_target(zs, labels));
  Tensor nckd_row = sum_cols(mul(exp(ltn), sub(ltn, lsn)));
  Tensor nckd = scale(mean_all(nckd_row), t2);

  return add(scale(tckd, cfg.dkd_alpha), scale(nckd, cfg.dkd_beta));
}

}  // namespace gtn
