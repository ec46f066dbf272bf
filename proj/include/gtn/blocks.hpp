// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale network building blocks: residual dense/conv blocks, identity
// and zero candidate operations, linear layers, and the teacher network.

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gtn/ops.hpp"
#include "gtn/tensor.hpp"

namespace gtn {

enum class BlockKind { kDenseResidual, kConvResidual, kIdentity, kZero };

const char* block_kind_name(BlockKind kind);
BlockKind block_kind_from_name(const std::string& name);

// Residual blocks compute x + F(x) when in_dim == out_dim, else F(x).
//   depth 1: F(x) = relu(W1 x + b1)            (W1: in -> out)
//   depth 2: F(x) = W2 relu(W1 x + b1) + b2    (W1: in -> width, W2: width -> out)
// Conv blocks use 3x3 kernels, stride 1, padding 1; dims are channel counts.
// identity requires in_dim == out_dim; zero emits zeros of the output shape.
struct BlockSpec {
  BlockKind kind = BlockKind::kIdentity;
  int width = 1;
  int depth = 1;
  int in_dim = 1;
  int out_dim = 1;
};

// Throws std::invalid_argument on degenerate specs.
void validate_block_spec(const BlockSpec& spec);

// Closed-form trainable parameter count (weights + biases).
std::int64_t block_param_count(const BlockSpec& spec);

bool operator==(const BlockSpec& a, const BlockSpec& b);

class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, std::mt19937& rng, const std::string& name);

  Tensor forward(const Tensor& x) const { return add(matmul(x, w_), b_); }
  std::vector<Parameter> parameters() const;
  int in_dim() const { return w_.dim(0); }
  int out_dim() const { return w_.dim(1); }
  bool defined() const { return w_.defined(); }

  Tensor& weight() { return w_; }
  Tensor& bias() { return b_; }
  const Tensor& weight() const { return w_; }
  const Tensor& bias() const { return b_; }

 private:
  Tensor w_, b_;
  std::string name_;
};

// One selectable operation of a supernet layer (also used for plain teacher
// blocks). Parameters are created once; ops shared between networks alias
// the same storage.
class CandidateOp {
 public:
  CandidateOp(BlockSpec spec, std::mt19937& rng, std::string name);

  Tensor forward(const Tensor& x) const;
  const BlockSpec& spec() const { return spec_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::int64_t param_count() const;
  const std::string& name() const { return name_; }

 private:
  BlockSpec spec_;
  std::vector<Parameter> params_;
  std::string name_;
};

// Seeded fan-in-scaled uniform init, bound = sqrt(1 / fan_in).
std::vector<float> uniform_init(std::size_t count, int fan_in, std::mt19937& rng);

struct TeacherSpec {
  std::vector<BlockSpec> blocks;
  int classes = 2;
};

class TeacherNet {
 public:
  TeacherNet() = default;
  TeacherNet(TeacherSpec spec, std::mt19937& rng);

  struct Activations {
    std::vector<Tensor> block_out;  // features after each block
    Tensor logits;
  };

  Tensor forward(const Tensor& x) const;
  Activations forward_collect(const Tensor& x) const;

  int block_count() const { return static_cast<int>(blocks_.size()); }
  // Feature width available after block `i` (out_dim / channels).
  int feature_dim(int block_index) const;
  int classes() const { return spec_.classes; }
  const TeacherSpec& spec() const { return spec_; }

  std::vector<Parameter> parameters() const;

 private:
  TeacherSpec spec_;
  std::vector<std::shared_ptr<CandidateOp>> blocks_;
  Linear classifier_;
};

// Attach indices for n student branches: branch i attaches after teacher
// block i, so a 4-block teacher with n = 3 yields cut points [1, 2, 3].
std::vector<int> partition_teacher(const TeacherNet& teacher, int n);

}  // namespace gtn
