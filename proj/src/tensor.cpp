// SPDX-License-Identifier: Apache-2.0

#include "gtn/tensor.hpp"

#include <atomic>
#include <sstream>

namespace gtn {

namespace detail {

std::uint64_t next_storage_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> values, bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_str(shape));
  }
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not match value count " +
                     std::to_string(values.size()));
  }
  s_ = std::make_shared<detail::Storage>();
  s_->id = detail::next_storage_id();
  s_->shape = std::move(shape);
  s_->value = std::move(values);
  s_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::constant(std::vector<int> shape, float fill) {
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)), fill);
  return Tensor(std::move(shape), std::move(v), false);
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}, false); }

const std::vector<int>& Tensor::shape() const {
  if (!s_) throw std::logic_error("tensor: undefined");
  return s_->shape;
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }

std::vector<float>& Tensor::values() const {
  if (!s_) throw std::logic_error("tensor: undefined");
  return s_->value;
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not scalar");
  return values()[0];
}

bool Tensor::requires_grad() const { return s_ && s_->requires_grad; }

const std::vector<float>& Tensor::grad() const {
  if (!s_) throw std::logic_error("tensor: undefined");
  return s_->grad;
}

void Tensor::zero_grad() const {
  if (s_) s_->grad.clear();
}

std::uint64_t Tensor::id() const {
  if (!s_) return 0;
  return s_->id;
}

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::clear() {
  records_.clear();
  produced_.clear();
}

void Tape::record(const char* op, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn) {
  output.storage()->requires_grad = true;
  produced_.insert(output.id());
  records_.push_back(Record{op, std::move(inputs), output, std::move(fn)});
}

std::unordered_set<std::uint64_t> Tape::recorded_input_ids() const {
  std::unordered_set<std::uint64_t> ids;
  for (const auto& r : records_) {
    for (const auto& t : r.inputs) ids.insert(t.id());
  }
  return ids;
}

GradSink::GradSink(Tape& tape, std::unordered_map<std::uint64_t, std::vector<float>>& scratch)
    : tape_(tape), scratch_(scratch) {}

float* GradSink::sink_for(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  detail::Storage* s = t.storage();
  if (tape_.produced(s->id)) {
    auto& buf = scratch_[s->id];
    if (buf.empty()) buf.assign(s->value.size(), 0.0f);
    return buf.data();
  }
  if (s->grad.empty()) s->grad.assign(s->value.size(), 0.0f);
  tape_.touched_.insert(s->id);
  return s->grad.data();
}

NoGradGuard::NoGradGuard() : prev_(Tape::active().grad_enabled()) {
  Tape::active().set_grad_enabled(false);
}

NoGradGuard::~NoGradGuard() { Tape::active().set_grad_enabled(prev_); }

void backward(const Tensor& loss) {
  Tape& tape = Tape::active();
  if (!loss.defined() || loss.numel() != 1) {
    throw std::logic_error("backward: loss must be a defined scalar tensor");
  }
  if (tape.empty()) throw std::logic_error("backward: tape is empty");
  if (!tape.produced(loss.id())) {
    throw std::logic_error("backward: loss was not produced on the current tape");
  }

  std::unordered_map<std::uint64_t, std::vector<float>> scratch;
  scratch[loss.id()] = {1.0f};
  tape.touched_.clear();

  GradSink sink(tape, scratch);
  for (auto it = tape.records_.rbegin(); it != tape.records_.rend(); ++it) {
    auto found = scratch.find(it->output.id());
    if (found == scratch.end()) continue;  // not reachable from loss
    it->fn(found->second, sink);
    scratch.erase(found);
  }
}

}  // namespace gtn
