// SPDX-License-Identifier: Apache-2.0

#include "gtn/supernet.hpp"

#include <cmath>
#include <stdexcept>

namespace gtn {

SupernetSpec normalize_supernet_spec(SupernetSpec spec) {
  if (spec.feature_dim < 1) throw std::invalid_argument("supernet: feature_dim must be positive");
  if (spec.layers.empty()) throw std::invalid_argument("supernet: needs at least one layer");
  for (auto& layer : spec.layers) {
    if (layer.empty()) throw std::invalid_argument("supernet: layer with no candidates");
    for (auto& cand : layer) {
      cand.in_dim = spec.feature_dim;
      cand.out_dim = spec.feature_dim;
      validate_block_spec(cand);
    }
  }
  return spec;
}

Supernet::Supernet(SupernetSpec spec, std::mt19937& rng, const std::string& name)
    : spec_(normalize_supernet_spec(std::move(spec))) {
  for (int l = 0; l < spec_.depth(); ++l) {
    std::vector<std::shared_ptr<CandidateOp>> layer_ops;
    for (std::size_t j = 0; j < spec_.layers[l].size(); ++j) {
      layer_ops.push_back(std::make_shared<CandidateOp>(
          spec_.layers[l][j], rng,
          name + ".layer" + std::to_string(l) + ".cand" + std::to_string(j)));
    }
    ops_.push_back(std::move(layer_ops));
  }
}

int Supernet::candidate_count(int layer) const {
  return static_cast<int>(ops_.at(static_cast<std::size_t>(layer)).size());
}

const std::shared_ptr<CandidateOp>& Supernet::op(int layer, int j) const {
  return ops_.at(static_cast<std::size_t>(layer)).at(static_cast<std::size_t>(j));
}

std::vector<Parameter> Supernet::parameters() const {
  std::vector<Parameter> out;
  for (const auto& layer : ops_) {
    for (const auto& op : layer) {
      for (const auto& p : op->parameters()) out.push_back(p);
    }
  }
  return out;
}

std::vector<float> gate_probabilities(const SupernetLayer& layer) {
  const auto& phi = layer.phi.values();
  double mx = phi[0];
  for (float v : phi) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  std::vector<double> e(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) {
    e[j] = std::exp(static_cast<double>(phi[j]) - mx);
    sum += e[j];
  }
  std::vector<float> p(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) p[j] = static_cast<float>(e[j] / sum);
  return p;
}

int sample_gates(SupernetLayer& layer, std::mt19937& rng) {
  const int k = layer.candidate_count();
  if (k == 0) throw std::logic_error("sample_gates: layer has no candidates");
  for (float v : layer.phi.values()) {
    if (!std::isfinite(v)) throw std::domain_error("sample_gates: non-finite gate logit");
  }
  const double u = std::generate_canonical<double, 53>(rng);
  int chosen = k - 1;
  if (k > 1) {
    const auto p = gate_probabilities(layer);
    double cum = 0.0;
    for (int j = 0; j < k; ++j) {
      cum += p[j];
      if (u < cum) {
        chosen = j;
        break;
      }
    }
  } else {
    chosen = 0;
  }
  layer.gates.assign(static_cast<std::size_t>(k), 0);
  layer.gates[static_cast<std::size_t>(chosen)] = 1;
  layer.active = chosen;
  return chosen;
}

void clear_gates(SupernetLayer& layer) {
  layer.gates.clear();
  layer.active = -1;
}

Tensor mixed_forward(const SupernetLayer& layer, const Tensor& x) {
  if (!layer.gates_set()) throw std::logic_error("mixed_forward: gates not set this iteration");
  return layer.candidates[static_cast<std::size_t>(layer.active)]->forward(x);
}

Tensor PathNet::forward(const Tensor& x) const {
  Tensor h = x;
  if (adapter_) h = adapter_->forward(h);
  for (const auto& layer : layers_) h = mixed_forward(layer, h);
  if (h.rank() == 4) h = global_avg_pool(h);
  return head_.forward(h);
}

void PathNet::sample_all_gates(std::mt19937& rng) {
  for (auto& layer : layers_) sample_gates(layer, rng);
}

void PathNet::set_gates(const ArchitectureSample& sample) {
  if (sample.size() != layers_.size()) {
    throw std::invalid_argument("set_gates: sample length " + std::to_string(sample.size()) +
                                " vs " + std::to_string(layers_.size()) + " layers");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const int k = layers_[l].candidate_count();
    if (sample[l] < 0 || sample[l] >= k) {
      throw std::out_of_range("set_gates: index " + std::to_string(sample[l]) +
                              " out of range at layer " + std::to_string(l));
    }
    layers_[l].gates.assign(static_cast<std::size_t>(k), 0);
    layers_[l].gates[static_cast<std::size_t>(sample[l])] = 1;
    layers_[l].active = sample[l];
  }
}

ArchitectureSample PathNet::active_sample() const {
  ArchitectureSample s;
  for (const auto& layer : layers_) {
    if (!layer.gates_set()) throw std::logic_error("active_sample: gates not set");
    s.push_back(layer.active);
  }
  return s;
}

std::vector<Parameter> PathNet::own_parameters() const {
  std::vector<Parameter> out;
  if (adapter_) {
    for (const auto& p : adapter_->parameters()) out.push_back(p);
  }
  for (const auto& p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter> PathNet::parameters() const {
  std::vector<Parameter> out;
  if (adapter_) {
    for (const auto& p : adapter_->parameters()) out.push_back(p);
  }
  for (const auto& layer : layers_) {
    for (const auto& cand : layer.candidates) {
      for (const auto& p : cand->parameters()) out.push_back(p);
    }
  }
  for (const auto& p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter> PathNet::active_parameters() const {
  std::vector<Parameter> out;
  if (adapter_) {
    for (const auto& p : adapter_->parameters()) out.push_back(p);
  }
  for (const auto& layer : layers_) {
    if (!layer.gates_set()) throw std::logic_error("active_parameters: gates not set");
    for (const auto& p : layer.candidates[static_cast<std::size_t>(layer.active)]->parameters()) {
      out.push_back(p);
    }
  }
  for (const auto& p : head_.parameters()) out.push_back(p);
  return out;
}

std::int64_t PathNet::param_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

PathNet make_branch(const Supernet& sn, int first_layer, int input_dim, int classes,
                    std::mt19937& rng, const std::string& name) {
  if (first_layer < 0 || first_layer >= sn.depth()) {
    throw std::out_of_range("make_branch: first_layer " + std::to_string(first_layer) +
                            " out of range for depth " + std::to_string(sn.depth()));
  }
  PathNet net;
  net.name_ = name;
  const int fd = sn.spec().feature_dim;
  if (input_dim != fd) net.adapter_ = Linear(input_dim, fd, rng, name + ".adapter");
  for (int l = first_layer; l < sn.depth(); ++l) {
    SupernetLayer layer;
    for (int j = 0; j < sn.candidate_count(l); ++j) layer.candidates.push_back(sn.op(l, j));
    layer.phi = Tensor::zeros({sn.candidate_count(l)});
    net.layers_.push_back(std::move(layer));
  }
  net.head_ = Linear(fd, classes, rng, name + ".head");
  return net;
}

PathNet derive_student(const Supernet& sn, const SupernetSpec& spec,
                       const ArchitectureSample& sample, bool fresh, int input_dim, int classes,
                       std::mt19937& rng, const std::string& name) {
  const SupernetSpec norm = normalize_supernet_spec(spec);
  if (static_cast<int>(sample.size()) != norm.depth()) {
    throw std::invalid_argument("derive_student: sample length " + std::to_string(sample.size()) +
                                " vs supernet depth " + std::to_string(norm.depth()));
  }
  PathNet net;
  net.name_ = name;
  if (input_dim != norm.feature_dim) {
    net.adapter_ = Linear(input_dim, norm.feature_dim, rng, name + ".adapter");
  }
  for (int l = 0; l < norm.depth(); ++l) {
    const auto& cands = norm.layers[static_cast<std::size_t>(l)];
    if (sample[l] < 0 || sample[l] >= static_cast<int>(cands.size())) {
      throw std::out_of_range("derive_student: candidate index " + std::to_string(sample[l]) +
                              " out of range at layer " + std::to_string(l));
    }
    SupernetLayer layer;
    if (fresh) {
      layer.candidates.push_back(std::make_shared<CandidateOp>(
          cands[static_cast<std::size_t>(sample[l])], rng,
          name + ".layer" + std::to_string(l)));
    } else {
      layer.candidates.push_back(sn.op(l, sample[l]));
    }
    layer.phi = Tensor::zeros({1});
    layer.gates = {1};
    layer.active = 0;
    net.layers_.push_back(std::move(layer));
  }
  net.head_ = Linear(norm.feature_dim, classes, rng, name + ".head");
  return net;
}

PathNet make_search_net(const SupernetSpec& spec, int layer_budget, int input_dim, int classes,
                        std::mt19937& rng, const std::string& name) {
  const SupernetSpec norm = normalize_supernet_spec(spec);
  if (layer_budget < 1 || layer_budget > norm.depth()) {
    throw std::invalid_argument("search: layer budget " + std::to_string(layer_budget) +
                                " out of range for supernet depth " + std::to_string(norm.depth()));
  }
  SupernetSpec truncated = norm;
  truncated.layers.resize(static_cast<std::size_t>(layer_budget));
  // Fresh shared storage private to this search.
  Supernet sn(truncated, rng, name);
  PathNet net = make_branch(sn, 0, input_dim, classes, rng, name);
  return net;
}

void update_phi(PathNet& net, float reward, float step_size) {
  for (const auto& layer : net.layers()) {
    if (!layer.gates_set()) throw std::logic_error("update_phi: stale gate state (gates unset)");
  }
  if (!net.phi_baseline_set) {
    net.phi_baseline = reward;
    net.phi_baseline_set = true;
  }
  const float advantage = reward - net.phi_baseline;
  for (auto& layer : net.layers()) {
    const auto p = gate_probabilities(layer);
    auto& phi = layer.phi.values();
    for (int j = 0; j < layer.candidate_count(); ++j) {
      const float indicator = (j == layer.active) ? 1.0f : 0.0f;
      phi[static_cast<std::size_t>(j)] -= step_size * advantage * (indicator - p[static_cast<std::size_t>(j)]);
    }
  }
  net.phi_baseline = 0.9f * net.phi_baseline + 0.1f * reward;
}

std::int64_t student_param_count(const SupernetSpec& spec, const ArchitectureSample& sample,
                                 int input_dim, int classes) {
  const SupernetSpec norm = normalize_supernet_spec(spec);
  if (static_cast<int>(sample.size()) > norm.depth()) {
    throw std::invalid_argument("student_param_count: sample longer than supernet depth");
  }
  std::int64_t n = 0;
  if (input_dim != norm.feature_dim) {
    n += static_cast<std::int64_t>(input_dim) * norm.feature_dim + norm.feature_dim;
  }
  for (std::size_t l = 0; l < sample.size(); ++l) {
    const auto& cands = norm.layers[l];
    if (sample[l] < 0 || sample[l] >= static_cast<int>(cands.size())) {
      throw std::out_of_range("student_param_count: bad candidate index at layer " +
                              std::to_string(l));
    }
    n += block_param_count(cands[static_cast<std::size_t>(sample[l])]);
  }
  n += static_cast<std::int64_t>(norm.feature_dim) * classes + classes;
  return n;
}

}  // namespace gtn
