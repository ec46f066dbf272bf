// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "gtn/ops.hpp"
#include "gtn/tensor.hpp"
#include "oracles.hpp"

using namespace gtn;

namespace {

Tensor param(std::vector<int> shape, std::vector<float> v) {
  return Tensor(std::move(shape), std::move(v), /*requires_grad=*/true);
}

}  // namespace

TEST_CASE("tensor shape/data consistency is enforced") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0f, 2.0f}), ShapeError);
  CHECK_THROWS_AS(Tensor({0}, {}), ShapeError);
  Tensor t({2, 2}, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
  CHECK_FALSE(t.requires_grad());
}

TEST_CASE("matmul identity returns the other operand") {
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor a({3, 3}, {2.5f, -1, 0, 3, 4, 5, -2, 0.5f, 7});
  const Tensor out = matmul(eye, a);
  for (int i = 0; i < 9; ++i) CHECK(out.values()[i] == a.values()[i]);
}

TEST_CASE("matmul matches hand-expanded dot products") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  const Tensor out = matmul(a, b);
  CHECK(out.values() == std::vector<float>{19, 22, 43, 50});
}

TEST_CASE("matmul rejects non-conforming shapes naming the primitive") {
  Tensor a({2, 3}, std::vector<float>(6, 1.0f));
  Tensor b({2, 2}, std::vector<float>(4, 1.0f));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
  }
}

TEST_CASE("relu follows its definition") {
  const Tensor out = relu(Tensor({3}, {-1, 0, 2}));
  CHECK(out.values() == std::vector<float>{0, 0, 2});
}

TEST_CASE("softmax with temperature") {
  SUBCASE("equal logits give the uniform distribution for any T") {
    for (float T : {0.5f, 1.0f, 4.0f}) {
      const Tensor out = softmax_temperature(Tensor({1, 3}, {2, 2, 2}), T);
      for (float v : out.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-6));
    }
  }
  SUBCASE("two-logit closed form") {
    const Tensor out = softmax_temperature(Tensor({1, 2}, {1, 0}), 1.0f);
    const double e = std::exp(1.0);
    CHECK(out.values()[0] == doctest::Approx(e / (e + 1)).epsilon(1e-6));
    CHECK(out.values()[1] == doctest::Approx(1 / (e + 1)).epsilon(1e-6));
  }
  SUBCASE("high-temperature limit flattens") {
    const Tensor out = softmax_temperature(Tensor({1, 2}, {10, 0}), 1e6f);
    CHECK(std::abs(out.values()[0] - 0.5) < 1e-4);
    CHECK(std::abs(out.values()[1] - 0.5) < 1e-4);
  }
  SUBCASE("rows sum to one within 1e-6 and stay in [0,1]") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const auto v = oracle::random_floats(4 * 5, rng, -30.0f, 30.0f);
      const Tensor out = softmax_temperature(Tensor({4, 5}, v), 2.0f);
      for (int r = 0; r < 4; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 5; ++c) {
          const float p = out.values()[r * 5 + c];
          CHECK(p >= 0.0f);
          CHECK(p <= 1.0f);
          sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
      }
    }
  }
  SUBCASE("non-positive temperature is rejected") {
    CHECK_THROWS_AS(softmax_temperature(Tensor({1, 2}, {1, 0}), 0.0f), std::invalid_argument);
    CHECK_THROWS_AS(softmax_temperature(Tensor({1, 2}, {1, 0}), -1.0f), std::invalid_argument);
  }
}

TEST_CASE("backward on a linear sum gives unit gradients") {
  Tape::active().clear();
  Tensor w = param({3}, {1, 2, 3});
  // sum(w) composed as mean * n
  const Tensor loss = scale(mean_all(w), 3.0f);
  backward(loss);
  CHECK(w.grad() == std::vector<float>{1, 1, 1});
}

TEST_CASE("least-squares gradient matches the finite-difference oracle") {
  // loss(w) = mean over batch of (w . x - y)^2, values chosen exactly
  // representable so the reference is clean.
  const std::vector<float> wv = {0.5f, -0.25f, 1.0f};
  const std::vector<float> xv = {1.0f, 0.5f, -1.0f, 2.0f, -0.5f, 0.25f};  // 3x2: two samples
  const std::vector<float> yv = {0.75f, -0.5f};

  auto ref = [&](const oracle::Vec& w) {
    double acc = 0.0;
    for (int s = 0; s < 2; ++s) {
      double dot = 0.0;
      for (int j = 0; j < 3; ++j) dot += w[static_cast<std::size_t>(j)] * xv[j * 2 + s];
      const double r = dot - yv[s];
      acc += r * r;
    }
    return acc / 2.0;
  };

  Tape::active().clear();
  Tensor w = param({1, 3}, wv);
  Tensor x({3, 2}, xv);
  Tensor y({1, 2}, yv);
  Tensor diff = sub(matmul(w, x), y);
  const Tensor loss = mean_all(mul(diff, diff));
  backward(loss);

  const oracle::Vec fd = oracle::fd_grad(ref, oracle::to_double(wv), 1e-4);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(w.grad()[j] - fd[static_cast<std::size_t>(j)]) <=
          1e-4 * std::max(1.0, std::abs(fd[static_cast<std::size_t>(j)])));
  }
}

TEST_CASE("backward accumulates across calls until grads are reset") {
  Tape::active().clear();
  Tensor w = param({2}, {1.5f, -2.0f});
  const Tensor loss = scale(mean_all(w), 2.0f);
  backward(loss);
  const std::vector<float> once = w.grad();
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == 2.0f * once[i]);
  w.zero_grad();
  CHECK(w.grad().empty());
}

TEST_CASE("backward rejects non-scalar losses and empty tapes") {
  Tape::active().clear();
  Tensor w = param({2}, {1, 2});
  CHECK_THROWS_AS(backward(w), std::logic_error);  // nothing recorded yet
  const Tensor sum2 = scale(w, 2.0f);
  CHECK_THROWS_AS(backward(sum2), std::logic_error);  // non-scalar
  Tape::active().clear();
  {
    NoGradGuard ng;
    const Tensor loss = mean_all(w);
    CHECK(Tape::active().empty());
    CHECK_THROWS_AS(backward(loss), std::logic_error);  // empty tape
  }
}

TEST_CASE("unreachable parameters keep their gradients untouched") {
  Tape::active().clear();
  Tensor w = param({2}, {1, 2});
  Tensor unused = param({2}, {3, 4});
  const Tensor loss = mean_all(scale(w, 3.0f));
  backward(loss);
  CHECK_FALSE(w.grad().empty());
  CHECK(unused.grad().empty());
}

TEST_CASE("identical inputs and op order give bit-identical outputs") {
  auto run = [] {
    std::mt19937 rng(99);
    const auto a = oracle::random_floats(12, rng);
    const auto b = oracle::random_floats(12, rng);
    Tensor ta({3, 4}, a), tb({4, 3}, b);
    return mean_all(relu(matmul(ta, tb))).item();
  };
  CHECK(run() == run());
}

TEST_CASE("finite inputs produce finite outputs through deep compositions") {
  std::mt19937 rng(3);
  Tensor x({4, 6}, oracle::random_floats(24, rng, -10.0f, 10.0f));
  Tensor h = x;
  for (int i = 0; i < 5; ++i) h = log_softmax(relu(scale(h, 1.7f)));
  for (float v : h.values()) CHECK(std::isfinite(v));
}
