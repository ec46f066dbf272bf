// SPDX-License-Identifier: Apache-2.0
//
// Dense float tensors with tape-based reverse-mode differentiation.
//
// Storage is 32-bit float; reductions accumulate in double. A thread-local
// Tape records primitive applications whenever an input requires gradient;
// backward() replays the tape in reverse and accumulates into the persistent
// .grad buffers of leaf tensors (parameters). Intermediate gradients live in
// per-call scratch buffers and are discarded.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace gtn {

// Thrown when operand shapes do not conform to a primitive's signature.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Storage {
  std::uint64_t id = 0;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
};

std::uint64_t next_storage_id();

}  // namespace detail

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, std::vector<float> values, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor constant(std::vector<int> shape, float fill);
  static Tensor scalar(float v);

  bool defined() const { return static_cast<bool>(s_); }
  const std::vector<int>& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int i) const { return shape().at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const;

  // Tensors are handles onto shared storage, so element access mutates
  // through const handles (copies alias, they do not deep-copy).
  std::vector<float>& values() const;

  // Scalar read; requires numel() == 1.
  float item() const;

  bool requires_grad() const;
  // Gradient accumulated by backward(); empty vector when none has arrived.
  const std::vector<float>& grad() const;
  void zero_grad() const;

  // Storage identity. Two tensors alias iff ids are equal.
  std::uint64_t id() const;

  detail::Storage* storage() const { return s_.get(); }

 private:
  std::shared_ptr<detail::Storage> s_;
};

// A named trainable tensor. stable_id() identifies the underlying storage,
// so aliasing (weight sharing) is observable by id equality.
struct Parameter {
  Tensor tensor;
  std::string name;

  std::uint64_t stable_id() const { return tensor.id(); }
};

class Tape;

// Routes gradient contributions during backward: scratch buffers for
// tape-produced tensors, persistent .grad for leaves.
class GradSink {
 public:
  GradSink(Tape& tape, std::unordered_map<std::uint64_t, std::vector<float>>& scratch);

  // Accumulation buffer for `t`, or nullptr when `t` takes no gradient.
  float* sink_for(const Tensor& t);

 private:
  Tape& tape_;
  std::unordered_map<std::uint64_t, std::vector<float>>& scratch_;
};

using BackwardFn = std::function<void(const std::vector<float>& grad_out, GradSink& sink)>;

class Tape {
 public:
  // Thread-local tape; each thread owns an independent computation graph.
  static Tape& active();

  void clear();
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  bool grad_enabled() const { return enabled_; }
  void set_grad_enabled(bool on) { enabled_ = on; }

  // Appends a record. Marks the output as gradient-bearing.
  void record(const char* op, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn);

  bool produced(std::uint64_t id) const { return produced_.count(id) != 0; }

  // Ids of leaf storages that received gradient in the most recent backward.
  const std::unordered_set<std::uint64_t>& touched_leaf_ids() const { return touched_; }

  // Ids of every storage appearing as an input of a recorded primitive.
  std::unordered_set<std::uint64_t> recorded_input_ids() const;

  friend void backward(const Tensor& loss);
  friend class GradSink;

 private:
  struct Record {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };

  std::vector<Record> records_;
  std::unordered_set<std::uint64_t> produced_;
  std::unordered_set<std::uint64_t> touched_;
  bool enabled_ = true;
};

// Disables tape recording for its scope (inference-only forward passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Reverse pass over the active tape. `loss` must be a scalar produced on the
// current tape. Accumulates (+=) into leaf .grad buffers; repeated calls
// without zero_grad() sum their contributions.
void backward(const Tensor& loss);

}  // namespace gtn
