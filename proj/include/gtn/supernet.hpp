// SPDX-License-Identifier: Apache-2.0
//
// Weight-sharing supernet with one-hot path binarization. Each layer holds k
// candidate operations and a trainable gate-logit vector phi; sampling draws
// the active candidate from softmax(phi) and only that candidate is evaluated
// and recorded, so one iteration never touches more than a single sub-network.

#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gtn/blocks.hpp"

namespace gtn {

struct SupernetSpec {
  int feature_dim = 0;                          // uniform in/out width of every candidate
  std::vector<std::vector<BlockSpec>> layers;   // layers[l][j], dims filled to feature_dim

  int depth() const { return static_cast<int>(layers.size()); }
};

// Candidate specs with in/out forced to feature_dim.
SupernetSpec normalize_supernet_spec(SupernetSpec spec);

// The shared candidate storage: op (l, j) is created once and aliased by
// every branch or derived view that selects it.
class Supernet {
 public:
  Supernet() = default;
  Supernet(SupernetSpec spec, std::mt19937& rng, const std::string& name = "supernet");

  int depth() const { return static_cast<int>(ops_.size()); }
  int candidate_count(int layer) const;
  const std::shared_ptr<CandidateOp>& op(int layer, int j) const;
  const SupernetSpec& spec() const { return spec_; }
  std::vector<Parameter> parameters() const;

 private:
  SupernetSpec spec_;
  std::vector<std::vector<std::shared_ptr<CandidateOp>>> ops_;
};

struct SupernetLayer {
  std::vector<std::shared_ptr<CandidateOp>> candidates;
  Tensor phi;              // [k] gate logits; updated by score-function steps
  std::vector<int> gates;  // one-hot over candidates; empty while unset
  int active = -1;

  int candidate_count() const { return static_cast<int>(candidates.size()); }
  bool gates_set() const { return active >= 0; }
};

// softmax(phi), computed in double.
std::vector<float> gate_probabilities(const SupernetLayer& layer);

// Draws the active index from softmax(phi) and sets the one-hot gate vector.
// Consumes exactly one uniform draw regardless of k.
int sample_gates(SupernetLayer& layer, std::mt19937& rng);

void clear_gates(SupernetLayer& layer);

// Evaluates only the active candidate; inactive candidates stay off the tape.
Tensor mixed_forward(const SupernetLayer& layer, const Tensor& x);

// One chosen candidate index per layer.
using ArchitectureSample = std::vector<int>;

// A gated chain with an optional input adapter and a classifier head. Serves
// as a grafted student branch (input = teacher features), a standalone
// student, and the search network.
class PathNet {
 public:
  PathNet() = default;

  Tensor forward(const Tensor& x) const;

  void sample_all_gates(std::mt19937& rng);
  void set_gates(const ArchitectureSample& sample);
  ArchitectureSample active_sample() const;

  int depth() const { return static_cast<int>(layers_.size()); }
  std::vector<SupernetLayer>& layers() { return layers_; }
  const std::vector<SupernetLayer>& layers() const { return layers_; }
  Linear& head() { return head_; }
  const Linear& head() const { return head_; }
  std::optional<Linear>& adapter() { return adapter_; }

  // Adapter + head only (always owned by this net, never shared).
  std::vector<Parameter> own_parameters() const;
  // Own parameters plus every referenced candidate's parameters.
  std::vector<Parameter> parameters() const;
  // Parameters of the currently active path (own + active candidates).
  std::vector<Parameter> active_parameters() const;

  std::int64_t param_count() const;
  const std::string& name() const { return name_; }

  float phi_baseline = 0.0f;
  bool phi_baseline_set = false;

  friend PathNet make_branch(const Supernet& sn, int first_layer, int input_dim, int classes,
                             std::mt19937& rng, const std::string& name);
  friend PathNet derive_student(const Supernet& sn, const SupernetSpec& spec,
                                const ArchitectureSample& sample, bool fresh, int input_dim,
                                int classes, std::mt19937& rng, const std::string& name);
  friend PathNet make_search_net(const SupernetSpec& spec, int layer_budget, int input_dim,
                                 int classes, std::mt19937& rng, const std::string& name);

 private:
  std::optional<Linear> adapter_;
  std::vector<SupernetLayer> layers_;
  Linear head_;
  std::string name_;
};

// Branch over shared supernet ops [first_layer, depth); phi zero-initialized
// (uniform sampling). An adapter is inserted when input_dim differs from the
// supernet feature width.
PathNet make_branch(const Supernet& sn, int first_layer, int input_dim, int classes,
                    std::mt19937& rng, const std::string& name);

// Standalone network realizing `sample`. fresh=true builds newly initialized
// parameters (the KD-stage student); fresh=false aliases the shared supernet
// parameters (views for aliasing checks).
PathNet derive_student(const Supernet& sn, const SupernetSpec& spec,
                       const ArchitectureSample& sample, bool fresh, int input_dim, int classes,
                       std::mt19937& rng, const std::string& name = "student");

// Fresh full-candidate net over the first `layer_budget` layers.
PathNet make_search_net(const SupernetSpec& spec, int layer_budget, int input_dim, int classes,
                        std::mt19937& rng, const std::string& name = "search");

// Score-function step on every layer's phi from one sampled-path reward:
//   phi -= step * (reward - baseline) * (onehot(active) - softmax(phi))
// with an exponential-moving-average baseline (decay 0.9) kept on the net.
// Requires gates set on every layer; candidate parameters are untouched.
void update_phi(PathNet& net, float reward, float step_size);

// Parameter count of a realized student: adapter (if any) + blocks + head.
std::int64_t student_param_count(const SupernetSpec& spec, const ArchitectureSample& sample,
                                 int input_dim, int classes);

}  // namespace gtn
