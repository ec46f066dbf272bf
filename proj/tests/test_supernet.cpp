// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "gtn/supernet.hpp"
#include "oracles.hpp"

using namespace gtn;

namespace {

SupernetSpec small_pool(int layers, int feature_dim = 8) {
  SupernetSpec spec;
  spec.feature_dim = feature_dim;
  std::vector<BlockSpec> cands = {
      {BlockKind::kDenseResidual, 8, 1, 0, 0},
      {BlockKind::kDenseResidual, 16, 2, 0, 0},
      {BlockKind::kIdentity, 1, 1, 0, 0},
      {BlockKind::kZero, 1, 1, 0, 0},
  };
  for (int l = 0; l < layers; ++l) spec.layers.push_back(cands);
  return spec;
}

}  // namespace

TEST_CASE("single-candidate layers always sample index 0 with a one-hot gate") {
  std::mt19937 rng(1);
  Supernet sn(small_pool(1), rng);
  SupernetLayer layer;
  layer.candidates = {sn.op(0, 0)};
  layer.phi = Tensor::zeros({1});
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_gates(layer, rng) == 0);
    CHECK(layer.gates == std::vector<int>{1});
  }
}

TEST_CASE("uniform gate logits sample each candidate half the time") {
  std::mt19937 rng(2);
  SupernetLayer layer;
  std::mt19937 prng(3);
  Supernet sn(small_pool(1), prng);
  layer.candidates = {sn.op(0, 0), sn.op(0, 1)};
  layer.phi = Tensor::zeros({2});
  int count0 = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const int j = sample_gates(layer, rng);
    // one-hot gate invariant on every draw
    int sum = 0;
    for (int g : layer.gates) {
      CHECK((g == 0 || g == 1));
      sum += g;
    }
    CHECK(sum == 1);
    if (j == 0) ++count0;
  }
  const double freq = static_cast<double>(count0) / draws;
  CHECK(freq > 0.48);
  CHECK(freq < 0.52);
}

TEST_CASE("dominant gate logit draws its candidate essentially always") {
  std::mt19937 rng(4);
  std::mt19937 prng(5);
  Supernet sn(small_pool(1), prng);
  SupernetLayer layer;
  layer.candidates = {sn.op(0, 0), sn.op(0, 1), sn.op(0, 2)};
  layer.phi = Tensor({3}, {20.0f, 0.0f, 0.0f});
  int count0 = 0;
  for (int i = 0; i < 10000; ++i) {
    if (sample_gates(layer, rng) == 0) ++count0;
  }
  CHECK(static_cast<double>(count0) / 10000.0 > 0.999);
}

TEST_CASE("non-finite gate logits are rejected") {
  std::mt19937 rng(6);
  Supernet sn(small_pool(1), rng);
  SupernetLayer layer;
  layer.candidates = {sn.op(0, 0)};
  layer.phi = Tensor({1}, {std::nanf("")});
  CHECK_THROWS_AS(sample_gates(layer, rng), std::domain_error);
}

TEST_CASE("mixed_forward equals the standalone active candidate bit-for-bit") {
  std::mt19937 rng(7);
  Supernet sn(small_pool(1), rng);
  SupernetLayer layer;
  layer.candidates = {sn.op(0, 0), sn.op(0, 1), sn.op(0, 2)};
  layer.phi = Tensor::zeros({3});
  Tensor x({3, 8}, oracle::random_floats(24, rng));

  layer.gates = {0, 1, 0};
  layer.active = 1;
  const Tensor gated = mixed_forward(layer, x);
  const Tensor standalone = sn.op(0, 1)->forward(x);
  CHECK(gated.values() == standalone.values());

  // active zero candidate gives exact zeros
  SupernetLayer zlayer;
  zlayer.candidates = {sn.op(0, 3)};
  zlayer.gates = {1};
  zlayer.active = 0;
  const Tensor zero_out = mixed_forward(zlayer, x);
  for (float v : zero_out.values()) CHECK(v == 0.0f);
}

TEST_CASE("mixed_forward requires gates to be set") {
  std::mt19937 rng(8);
  Supernet sn(small_pool(1), rng);
  SupernetLayer layer;
  layer.candidates = {sn.op(0, 0)};
  layer.phi = Tensor::zeros({1});
  CHECK_THROWS_AS(mixed_forward(layer, Tensor::zeros({1, 8})), std::logic_error);
}

TEST_CASE("inactive candidates never reach the tape") {
  std::mt19937 rng(9);
  Supernet sn(small_pool(2), rng);
  PathNet branch = make_branch(sn, 0, 8, 3, rng, "b");
  branch.set_gates({0, 1});

  Tape::active().clear();
  Tensor x({2, 8}, oracle::random_floats(16, rng));
  branch.forward(x);
  const auto recorded = Tape::active().recorded_input_ids();

  std::set<std::uint64_t> active_ids;
  for (const auto& p : sn.op(0, 0)->parameters()) active_ids.insert(p.stable_id());
  for (const auto& p : sn.op(1, 1)->parameters()) active_ids.insert(p.stable_id());
  for (const auto& p : sn.op(0, 0)->parameters()) CHECK(recorded.count(p.stable_id()) == 1);
  for (int l = 0; l < 2; ++l) {
    for (int j = 0; j < 4; ++j) {
      for (const auto& p : sn.op(l, j)->parameters()) {
        if (!active_ids.count(p.stable_id())) CHECK(recorded.count(p.stable_id()) == 0);
      }
    }
  }
  Tape::active().clear();
}

TEST_CASE("branch of identities with a pass-through head reproduces its input") {
  std::mt19937 rng(10);
  Supernet sn(small_pool(3), rng);
  PathNet branch = make_branch(sn, 0, 8, 8, rng, "b");
  branch.set_gates({2, 2, 2});  // identity everywhere
  // pass-through head: unit diagonal, zero bias
  auto& w = branch.head().weight().values();
  std::fill(w.begin(), w.end(), 0.0f);
  for (int i = 0; i < 8; ++i) w[i * 8 + i] = 1.0f;
  std::fill(branch.head().bias().values().begin(), branch.head().bias().values().end(), 0.0f);

  Tensor x({2, 8}, oracle::random_floats(16, rng));
  CHECK(branch.forward(x).values() == x.values());
}

TEST_CASE("branch forward equals the hand-composed standalone chain") {
  std::mt19937 rng(11);
  Supernet sn(small_pool(2), rng);
  PathNet branch = make_branch(sn, 0, 8, 3, rng, "b");
  branch.set_gates({1, 0});
  Tensor x({4, 8}, oracle::random_floats(32, rng));
  const Tensor via_branch = branch.forward(x);
  const Tensor by_hand = branch.head().forward(sn.op(1, 0)->forward(sn.op(0, 1)->forward(x)));
  for (std::size_t i = 0; i < via_branch.values().size(); ++i) {
    CHECK(via_branch.values()[i] == doctest::Approx(by_hand.values()[i]).epsilon(1e-6));
  }
}

TEST_CASE("an adapter is inserted exactly when input width differs") {
  std::mt19937 rng(12);
  Supernet sn(small_pool(1), rng);
  PathNet same = make_branch(sn, 0, 8, 3, rng, "same");
  CHECK_FALSE(same.adapter().has_value());
  PathNet diff = make_branch(sn, 0, 5, 3, rng, "diff");
  CHECK(diff.adapter().has_value());
  Tensor x({2, 5}, oracle::random_floats(10, rng));
  diff.set_gates({0});
  CHECK(diff.forward(x).shape() == std::vector<int>{2, 3});
}

TEST_CASE("derive_student") {
  std::mt19937 rng(13);
  const SupernetSpec spec = small_pool(2);
  Supernet sn(spec, rng);

  SUBCASE("all-identity sample computes head(x) only") {
    std::mt19937 r2(14);
    PathNet s = derive_student(sn, spec, {2, 2}, true, 8, 3, r2);
    Tensor x({2, 8}, oracle::random_floats(16, rng));
    const Tensor out = s.forward(x);
    const Tensor head_only = s.head().forward(x);
    CHECK(out.values() == head_only.values());
    CHECK(s.param_count() == 8 * 3 + 3);
  }

  SUBCASE("fresh=false views alias the shared parameters") {
    std::mt19937 r2(15);
    PathNet view = derive_student(sn, spec, {0, 1}, false, 8, 3, r2);
    Tensor x({1, 8}, oracle::random_floats(8, rng));
    const auto before = view.forward(x).values();
    sn.op(0, 0)->parameters()[0].tensor.values()[0] += 0.5f;
    const auto after = view.forward(x).values();
    CHECK(before != after);
    CHECK(view.layers()[0].candidates[0]->parameters()[0].stable_id() ==
          sn.op(0, 0)->parameters()[0].stable_id());
  }

  SUBCASE("fresh students are deterministic in the seed") {
    auto build = [&] {
      std::mt19937 r(77);
      return derive_student(sn, spec, {1, 0}, true, 4, 3, r);
    };
    const PathNet a = build();
    const PathNet b = build();
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].tensor.values() == pb[i].tensor.values());
    }
  }

  SUBCASE("invalid candidate index is rejected") {
    std::mt19937 r2(16);
    CHECK_THROWS_AS(derive_student(sn, spec, {9, 0}, true, 8, 3, r2), std::out_of_range);
  }

  SUBCASE("two samples agreeing at a layer share that layer's parameters") {
    std::mt19937 r2(17);
    PathNet v1 = derive_student(sn, spec, {1, 0}, false, 8, 3, r2);
    PathNet v2 = derive_student(sn, spec, {1, 2}, false, 8, 3, r2);
    CHECK(v1.layers()[0].candidates[0]->parameters()[0].stable_id() ==
          v2.layers()[0].candidates[0]->parameters()[0].stable_id());
  }
}

TEST_CASE("zero-op everywhere still produces finite logits") {
  std::mt19937 rng(18);
  const SupernetSpec spec = small_pool(2);
  Supernet sn(spec, rng);
  PathNet s = derive_student(sn, spec, {3, 3}, true, 8, 3, rng);
  const Tensor out = s.forward(Tensor({2, 8}, oracle::random_floats(16, rng)));
  for (float v : out.values()) CHECK(std::isfinite(v));
}

TEST_CASE("update_phi") {
  std::mt19937 rng(19);
  const SupernetSpec spec = small_pool(1);
  Supernet sn(spec, rng);

  SUBCASE("k=1 leaves phi unchanged") {
    PathNet net = make_branch(sn, 0, 8, 3, rng, "b");
    net.layers().resize(1);
    net.layers()[0].candidates = {sn.op(0, 0)};
    net.layers()[0].phi = Tensor::zeros({1});
    net.set_gates({0});
    for (int i = 0; i < 100; ++i) update_phi(net, 1.0f + 0.1f * i, 0.5f);
    CHECK(net.layers()[0].phi.values()[0] == 0.0f);
  }

  SUBCASE("stale gates are rejected") {
    PathNet net = make_branch(sn, 0, 8, 3, rng, "b");
    CHECK_THROWS_AS(update_phi(net, 1.0f, 0.1f), std::logic_error);
  }

  SUBCASE("constant reward with a baseline keeps phi still") {
    std::mt19937 r(20);
    PathNet net = make_branch(sn, 0, 8, 3, r, "b");
    double total_step = 0.0;
    for (int i = 0; i < 10000; ++i) {
      net.sample_all_gates(r);
      const auto before = net.layers()[0].phi.values();
      update_phi(net, 0.7f, 0.05f);
      const auto& after = net.layers()[0].phi.values();
      for (std::size_t j = 0; j < before.size(); ++j) {
        total_step += std::abs(after[j] - before[j]);
      }
    }
    CHECK(total_step / 10000.0 < 1e-3 * 0.05);
  }

  SUBCASE("the lower-loss arm gains probability") {
    std::mt19937 r(21);
    PathNet net = make_branch(sn, 0, 8, 3, r, "b");
    auto p0 = [&] { return gate_probabilities(net.layers()[0])[0]; };
    const float initial = p0();
    float mid = 0.0f;
    std::normal_distribution<float> noise(0.0f, 0.05f);
    for (int i = 0; i < 4000; ++i) {
      net.sample_all_gates(r);
      const int j = net.layers()[0].active;
      const float reward = (j == 0 ? 0.2f : 0.8f) + noise(r);
      update_phi(net, reward, 0.05f);
      if (i == 2000) mid = p0();
    }
    CHECK(initial == doctest::Approx(0.25f));
    CHECK(mid > initial);
    CHECK(p0() > 0.9f);
  }
}

TEST_CASE("student_param_count matches realized students") {
  std::mt19937 rng(22);
  const SupernetSpec spec = small_pool(3);
  Supernet sn(spec, rng);
  for (ArchitectureSample sample : {ArchitectureSample{0, 1, 2}, {3, 0, 0}, {2, 2, 2}}) {
    PathNet s = derive_student(sn, spec, sample, true, 5, 4, rng);
    CHECK(s.param_count() == student_param_count(spec, sample, 5, 4));
  }
}
