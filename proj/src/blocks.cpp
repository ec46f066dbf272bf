// SPDX-License-Identifier: Apache-2.0

#include "gtn/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace gtn {

const char* block_kind_name(BlockKind kind) {
  switch (kind) {
    case BlockKind::kDenseResidual: return "dense-residual";
    case BlockKind::kConvResidual: return "conv-residual";
    case BlockKind::kIdentity: return "identity";
    case BlockKind::kZero: return "zero";
  }
  return "?";
}

BlockKind block_kind_from_name(const std::string& name) {
  if (name == "dense-residual") return BlockKind::kDenseResidual;
  if (name == "conv-residual") return BlockKind::kConvResidual;
  if (name == "identity") return BlockKind::kIdentity;
  if (name == "zero") return BlockKind::kZero;
  throw std::invalid_argument("unknown block kind '" + name + "'");
}

void validate_block_spec(const BlockSpec& spec) {
  if (spec.in_dim < 1 || spec.out_dim < 1) {
    throw std::invalid_argument("block spec: dims must be positive");
  }
  switch (spec.kind) {
    case BlockKind::kIdentity:
      if (spec.in_dim != spec.out_dim) {
        throw std::invalid_argument("identity block requires in_dim == out_dim, got " +
                                    std::to_string(spec.in_dim) + " vs " +
                                    std::to_string(spec.out_dim));
      }
      break;
    case BlockKind::kZero:
      break;
    case BlockKind::kDenseResidual:
    case BlockKind::kConvResidual:
      if (spec.width < 1) throw std::invalid_argument("block spec: width must be positive");
      if (spec.depth != 1 && spec.depth != 2) {
        throw std::invalid_argument("block spec: depth must be 1 or 2, got " +
                                    std::to_string(spec.depth));
      }
      break;
  }
}

std::int64_t block_param_count(const BlockSpec& s) {
  switch (s.kind) {
    case BlockKind::kIdentity:
    case BlockKind::kZero:
      return 0;
    case BlockKind::kDenseResidual:
      if (s.depth == 1) return static_cast<std::int64_t>(s.in_dim) * s.out_dim + s.out_dim;
      return static_cast<std::int64_t>(s.in_dim) * s.width + s.width +
             static_cast<std::int64_t>(s.width) * s.out_dim + s.out_dim;
    case BlockKind::kConvResidual:
      if (s.depth == 1) return static_cast<std::int64_t>(s.out_dim) * s.in_dim * 9 + s.out_dim;
      return static_cast<std::int64_t>(s.width) * s.in_dim * 9 + s.width +
             static_cast<std::int64_t>(s.out_dim) * s.width * 9 + s.out_dim;
  }
  return 0;
}

bool operator==(const BlockSpec& a, const BlockSpec& b) {
  if (a.kind != b.kind || a.in_dim != b.in_dim || a.out_dim != b.out_dim) return false;
  if (a.kind == BlockKind::kIdentity || a.kind == BlockKind::kZero) return true;
  return a.width == b.width && a.depth == b.depth;
}

std::vector<float> uniform_init(std::size_t count, int fan_in, std::mt19937& rng) {
  const float bound = std::sqrt(1.0f / static_cast<float>(fan_in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  std::vector<float> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

Linear::Linear(int in, int out, std::mt19937& rng, const std::string& name) : name_(name) {
  w_ = Tensor({in, out}, uniform_init(static_cast<std::size_t>(in) * out, in, rng), true);
  b_ = Tensor({out}, uniform_init(static_cast<std::size_t>(out), in, rng), true);
}

std::vector<Parameter> Linear::parameters() const {
  return {{w_, name_ + ".w"}, {b_, name_ + ".b"}};
}

CandidateOp::CandidateOp(BlockSpec spec, std::mt19937& rng, std::string name)
    : spec_(spec), name_(std::move(name)) {
  validate_block_spec(spec_);
  switch (spec_.kind) {
    case BlockKind::kIdentity:
    case BlockKind::kZero:
      break;
    case BlockKind::kDenseResidual: {
      const int hidden = spec_.depth == 2 ? spec_.width : spec_.out_dim;
      Tensor w1({spec_.in_dim, hidden},
                uniform_init(static_cast<std::size_t>(spec_.in_dim) * hidden, spec_.in_dim, rng), true);
      Tensor b1({hidden}, uniform_init(static_cast<std::size_t>(hidden), spec_.in_dim, rng), true);
      params_.push_back({w1, name_ + ".w1"});
      params_.push_back({b1, name_ + ".b1"});
      if (spec_.depth == 2) {
        Tensor w2({spec_.width, spec_.out_dim},
                  uniform_init(static_cast<std::size_t>(spec_.width) * spec_.out_dim, spec_.width, rng), true);
        Tensor b2({spec_.out_dim}, uniform_init(static_cast<std::size_t>(spec_.out_dim), spec_.width, rng), true);
        params_.push_back({w2, name_ + ".w2"});
        params_.push_back({b2, name_ + ".b2"});
      }
      break;
    }
    case BlockKind::kConvResidual: {
      const int hidden = spec_.depth == 2 ? spec_.width : spec_.out_dim;
      const int fan_in = spec_.in_dim * 9;
      Tensor k1({hidden, spec_.in_dim, 3, 3},
                uniform_init(static_cast<std::size_t>(hidden) * spec_.in_dim * 9, fan_in, rng), true);
      Tensor b1({hidden}, uniform_init(static_cast<std::size_t>(hidden), fan_in, rng), true);
      params_.push_back({k1, name_ + ".k1"});
      params_.push_back({b1, name_ + ".b1"});
      if (spec_.depth == 2) {
        const int fan2 = spec_.width * 9;
        Tensor k2({spec_.out_dim, spec_.width, 3, 3},
                  uniform_init(static_cast<std::size_t>(spec_.out_dim) * spec_.width * 9, fan2, rng), true);
        Tensor b2({spec_.out_dim}, uniform_init(static_cast<std::size_t>(spec_.out_dim), fan2, rng), true);
        params_.push_back({k2, name_ + ".k2"});
        params_.push_back({b2, name_ + ".b2"});
      }
      break;
    }
  }
}

std::int64_t CandidateOp::param_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

Tensor CandidateOp::forward(const Tensor& x) const {
  switch (spec_.kind) {
    case BlockKind::kIdentity: {
      if (x.rank() >= 2 && x.dim(1) != spec_.in_dim) {
        throw ShapeError("identity op: input " + shape_str(x.shape()) + " vs in_dim " +
                         std::to_string(spec_.in_dim));
      }
      return x;
    }
    case BlockKind::kZero: {
      if (x.rank() == 4) return Tensor::constant({x.dim(0), spec_.out_dim, x.dim(2), x.dim(3)}, 0.0f);
      return Tensor::constant({x.dim(0), spec_.out_dim}, 0.0f);
    }
    case BlockKind::kDenseResidual: {
      if (x.rank() != 2 || x.dim(1) != spec_.in_dim) {
        throw ShapeError("dense block: input " + shape_str(x.shape()) + " vs in_dim " +
                         std::to_string(spec_.in_dim));
      }
      Tensor f = relu(add(matmul(x, params_[0].tensor), params_[1].tensor));
      if (spec_.depth == 2) f = add(matmul(f, params_[2].tensor), params_[3].tensor);
      if (spec_.in_dim == spec_.out_dim) return add(x, f);
      return f;
    }
    case BlockKind::kConvResidual: {
      if (x.rank() != 4 || x.dim(1) != spec_.in_dim) {
        throw ShapeError("conv block: input " + shape_str(x.shape()) + " vs in_channels " +
                         std::to_string(spec_.in_dim));
      }
      Tensor f = relu(conv2d(x, params_[0].tensor, params_[1].tensor, 1, 1));
      if (spec_.depth == 2) f = conv2d(f, params_[2].tensor, params_[3].tensor, 1, 1);
      if (spec_.in_dim == spec_.out_dim) return add(x, f);
      return f;
    }
  }
  throw std::logic_error("candidate op: bad kind");
}

TeacherNet::TeacherNet(TeacherSpec spec, std::mt19937& rng) : spec_(std::move(spec)) {
  if (spec_.classes < 2) throw std::invalid_argument("teacher: needs at least 2 classes");
  if (spec_.blocks.empty()) throw std::invalid_argument("teacher: needs at least 1 block");
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    blocks_.push_back(std::make_shared<CandidateOp>(spec_.blocks[i], rng,
                                                    "teacher.block" + std::to_string(i)));
  }
  classifier_ = Linear(spec_.blocks.back().out_dim, spec_.classes, rng, "teacher.classifier");
}

Tensor TeacherNet::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& b : blocks_) h = b->forward(h);
  if (h.rank() == 4) h = global_avg_pool(h);
  return classifier_.forward(h);
}

TeacherNet::Activations TeacherNet::forward_collect(const Tensor& x) const {
  Activations acts;
  Tensor h = x;
  for (const auto& b : blocks_) {
    h = b->forward(h);
    acts.block_out.push_back(h);
  }
  if (h.rank() == 4) h = global_avg_pool(h);
  acts.logits = classifier_.forward(h);
  return acts;
}

int TeacherNet::feature_dim(int block_index) const {
  return spec_.blocks.at(static_cast<std::size_t>(block_index)).out_dim;
}

std::vector<Parameter> TeacherNet::parameters() const {
  std::vector<Parameter> out;
  for (const auto& b : blocks_) {
    for (const auto& p : b->parameters()) out.push_back(p);
  }
  for (const auto& p : classifier_.parameters()) out.push_back(p);
  return out;
}

std::vector<int> partition_teacher(const TeacherNet& teacher, int n) {
  if (n < 0) throw std::invalid_argument("partition_teacher: negative branch count");
  if (n > teacher.block_count() - 1) {
    throw std::invalid_argument("partition_teacher: " + std::to_string(n) +
                                " branches exceed the " +
                                std::to_string(teacher.block_count() - 1) +
                                " available cut points");
  }
  std::vector<int> cuts;
  for (int i = 1; i <= n; ++i) cuts.push_back(i);
  return cuts;
}

}  // namespace gtn
