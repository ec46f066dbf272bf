// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <set>

#include "gtn/blocks.hpp"
#include "oracles.hpp"

using namespace gtn;

TEST_CASE("identity and zero blocks carry no parameters") {
  std::mt19937 rng(1);
  CandidateOp id({BlockKind::kIdentity, 1, 1, 8, 8}, rng, "id");
  CHECK(id.param_count() == 0);
  CandidateOp zero({BlockKind::kZero, 1, 1, 8, 4}, rng, "zero");
  CHECK(zero.param_count() == 0);
}

TEST_CASE("identity with mismatched dims is rejected") {
  std::mt19937 rng(1);
  CHECK_THROWS_AS(CandidateOp({BlockKind::kIdentity, 1, 1, 8, 4}, rng, "bad"),
                  std::invalid_argument);
}

TEST_CASE("dense block parameter count counts weights and biases") {
  std::mt19937 rng(2);
  // depth 2, width 16, 8 -> 8: (8*16 + 16) + (16*8 + 8)
  BlockSpec spec{BlockKind::kDenseResidual, 16, 2, 8, 8};
  CandidateOp op(spec, rng, "b");
  CHECK(op.param_count() == 8 * 16 + 16 + 16 * 8 + 8);
  CHECK(op.param_count() == block_param_count(spec));

  BlockSpec d1{BlockKind::kDenseResidual, 16, 1, 8, 4};
  CHECK(block_param_count(d1) == 8 * 4 + 4);

  BlockSpec conv{BlockKind::kConvResidual, 6, 2, 3, 5};
  CHECK(block_param_count(conv) == 6 * 3 * 9 + 6 + 5 * 6 * 9 + 5);
  CandidateOp cop(conv, rng, "c");
  CHECK(cop.param_count() == block_param_count(conv));
}

TEST_CASE("identity forward is bit-identical, zero forward is exactly zero") {
  std::mt19937 rng(3);
  Tensor x({2, 4}, {1.0f, -2.0f, 3.0f, 0.5f, -0.25f, 4.0f, 0.0f, -1.5f});
  CandidateOp id({BlockKind::kIdentity, 1, 1, 4, 4}, rng, "id");
  const Tensor idy = id.forward(x);
  CHECK(idy.id() == x.id());  // same storage, not just same values
  CandidateOp zero({BlockKind::kZero, 1, 1, 4, 3}, rng, "zero");
  const Tensor zy = zero.forward(x);
  CHECK(zy.shape() == std::vector<int>{2, 3});
  for (float v : zy.values()) CHECK(v == 0.0f);
}

TEST_CASE("residual block with zeroed parameters passes input through") {
  std::mt19937 rng(4);
  for (int depth : {1, 2}) {
    CandidateOp op({BlockKind::kDenseResidual, 8, depth, 4, 4}, rng, "r");
    for (const auto& p : op.parameters()) {
      for (auto& v : p.tensor.values()) v = 0.0f;
    }
    Tensor x({2, 4}, {1, -2, 3, -4, 0.5f, 0.25f, -0.5f, 2});
    const Tensor y = op.forward(x);
    CHECK(y.values() == x.values());
  }
}

TEST_CASE("dense block dimension mismatch is rejected") {
  std::mt19937 rng(5);
  CandidateOp op({BlockKind::kDenseResidual, 8, 1, 4, 4}, rng, "r");
  CHECK_THROWS_AS(op.forward(Tensor({2, 5}, std::vector<float>(10, 1.0f))), ShapeError);
}

TEST_CASE("conv block keeps spatial dims and supports residual") {
  std::mt19937 rng(6);
  CandidateOp op({BlockKind::kConvResidual, 4, 2, 3, 3}, rng, "c");
  Tensor x({2, 3, 5, 5}, oracle::random_floats(2 * 3 * 25, rng));
  const Tensor y = op.forward(x);
  CHECK(y.shape() == std::vector<int>{2, 3, 5, 5});

  // zeroed params -> residual passthrough
  for (const auto& p : op.parameters()) {
    for (auto& v : p.tensor.values()) v = 0.0f;
  }
  const Tensor y0 = op.forward(x);
  CHECK(y0.values() == x.values());
}

TEST_CASE("weight sharing is observable through aliased candidate ops") {
  std::mt19937 rng(7);
  auto op = std::make_shared<CandidateOp>(BlockSpec{BlockKind::kDenseResidual, 4, 1, 4, 4}, rng, "shared");
  auto alias = op;  // same storage slot
  Tensor x({1, 4}, {1, 2, 3, 4});
  const auto before = alias->forward(x).values();
  op->parameters()[0].tensor.values()[0] += 1.0f;
  const auto after = alias->forward(x).values();
  CHECK(before != after);
  CHECK(op->parameters()[0].stable_id() == alias->parameters()[0].stable_id());
}

namespace {

TeacherSpec small_teacher(int blocks, int in_dim = 2, int classes = 3) {
  TeacherSpec spec;
  spec.classes = classes;
  for (int i = 0; i < blocks; ++i) {
    spec.blocks.push_back({BlockKind::kDenseResidual, 8, 2, i == 0 ? in_dim : 8, 8});
  }
  return spec;
}

}  // namespace

TEST_CASE("teacher forward produces batch x classes logits") {
  std::mt19937 rng(8);
  TeacherNet teacher(small_teacher(4), rng);
  Tensor x({5, 2}, oracle::random_floats(10, rng));
  const Tensor logits = teacher.forward(x);
  CHECK(logits.shape() == std::vector<int>{5, 3});
  const auto acts = teacher.forward_collect(x);
  CHECK(acts.block_out.size() == 4);
  CHECK(acts.logits.values() == logits.values());
}

TEST_CASE("partition_teacher uses the laddered attach convention") {
  std::mt19937 rng(9);
  TeacherNet four(small_teacher(4), rng);
  CHECK(partition_teacher(four, 3) == std::vector<int>{1, 2, 3});
  CHECK(partition_teacher(four, 0).empty());
  TeacherNet two(small_teacher(2), rng);
  CHECK_THROWS_AS(partition_teacher(two, 3), std::invalid_argument);
}

TEST_CASE("teacher parameters are uniquely named under the teacher prefix") {
  std::mt19937 rng(10);
  TeacherNet teacher(small_teacher(3), rng);
  const auto params = teacher.parameters();
  CHECK(params.size() == 3 * 4 + 2);
  std::set<std::string> names;
  for (const auto& p : params) {
    CHECK(p.name.rfind("teacher.", 0) == 0);
    names.insert(p.name);
  }
  CHECK(names.size() == params.size());
}
