// SPDX-License-Identifier: Apache-2.0

#include "gtn/nas.hpp"

#include <algorithm>
#include <numeric>

namespace gtn {

ArchitectureSample search(const SupernetSpec& spec, const Dataset& data,
                          const SearchBudget& budget, const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937 rng(static_cast<std::uint32_t>(budget.seed ^ (budget.seed >> 32)));
  PathNet net = make_search_net(spec, budget.max_searchable_layers, data.input_dim(),
                                data.classes, rng, "search");

  // Disjoint 80/20 split of the training data: parameter steps see the first
  // part, gate steps are rewarded on the held-back part.
  const int n = data.train.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_theta = std::max(1, static_cast<int>(0.8 * n));
  std::vector<int> theta_idx(order.begin(), order.begin() + n_theta);
  std::vector<int> val_idx(order.begin() + n_theta, order.end());
  if (val_idx.empty()) val_idx = theta_idx;

  const std::vector<Parameter> params = net.parameters();
  SgdOptimizer opt(cfg.learning_rate, cfg.momentum);
  const std::int64_t batches_per_epoch =
      (n_theta + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_iters = batches_per_epoch * budget.epochs;

  std::int64_t iter = 0;
  std::size_t val_pos = 0;
  for (int epoch = 0; epoch < budget.epochs; ++epoch) {
    std::shuffle(theta_idx.begin(), theta_idx.end(), rng);
    for (int start = 0; start < n_theta; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n_theta - start);
      net.sample_all_gates(rng);
      const bool phi_turn =
          cfg.alternation_period != 0 && iter % cfg.alternation_period == cfg.alternation_period - 1;
      if (phi_turn) {
        // Validation batch, cycled deterministically.
        const int vcount = std::min<std::size_t>(cfg.batch_size, val_idx.size());
        std::vector<int> vbatch(static_cast<std::size_t>(vcount));
        for (int i = 0; i < vcount; ++i) {
          vbatch[static_cast<std::size_t>(i)] = val_idx[(val_pos + i) % val_idx.size()];
        }
        val_pos = (val_pos + static_cast<std::size_t>(vcount)) % val_idx.size();
        const Batch vb = take_batch(data.train, vbatch, 0, vcount);
        NoGradGuard ng;
        const float reward = cross_entropy(net.forward(vb.inputs), vb.labels).item();
        update_phi(net, reward, cfg.phi_step_size);
      } else {
        const Batch batch = take_batch(data.train, theta_idx, start, count);
        Tape::active().clear();
        SgdOptimizer::zero_grad(params);
        const Tensor loss = cross_entropy(net.forward(batch.inputs), batch.labels);
        backward(loss);
        opt.set_lr(cfg.schedule == LrSchedule::kCosine
                       ? cosine_lr(cfg.learning_rate, iter, total_iters)
                       : cfg.learning_rate);
        opt.step(params);
        Tape::active().clear();
      }
      ++iter;
    }
  }

  ArchitectureSample result;
  for (const auto& layer : net.layers()) {
    const auto p = gate_probabilities(layer);
    result.push_back(static_cast<int>(
        std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return result;
}

std::array<ArchitectureSample, 3> budget_variants(const SupernetSpec& spec, const Dataset& data,
                                                  const std::array<int, 3>& budgets,
                                                  const TrainConfig& cfg, std::uint64_t seed) {
  if (!(budgets[0] >= budgets[1] && budgets[1] >= budgets[2])) {
    throw std::invalid_argument("budget_variants: budgets must be non-increasing");
  }
  std::array<ArchitectureSample, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    SearchBudget b;
    b.max_searchable_layers = budgets[i];
    b.epochs = cfg.epochs;
    b.seed = seed + i;
    out[i] = search(spec, data, b, cfg);
  }
  return out;
}

}  // namespace gtn
