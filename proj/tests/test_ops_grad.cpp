// SPDX-License-Identifier: Apache-2.0
//
// Gradient checks for every primitive: analytic gradients from the engine
// against central finite differences of a double-precision reference, on
// randomized small tensors, within max(1e-4 abs, 1e-3 rel).

#include <doctest.h>

#include <cmath>
#include <functional>

#include "gtn/ops.hpp"
#include "oracles.hpp"

using namespace gtn;
using oracle::Vec;

namespace {

constexpr double kAbsTol = 1e-4;
constexpr double kRelTol = 1e-3;

// Runs `build` (engine graph from parameter tensors), reduces with a fixed
// random linear functional, and checks every parameter's gradient against
// finite differences of `ref` under the same functional.
void check_op_grads(const std::vector<Tensor>& params, const std::vector<float>& weights,
                    const std::function<Tensor()>& build,
                    const std::function<Vec(const std::vector<Vec>&)>& ref) {
  Tape::active().clear();
  for (const auto& p : params) p.zero_grad();
  const Tensor out = build();
  REQUIRE(static_cast<std::size_t>(out.numel()) == weights.size());
  Tensor c(out.shape(), weights);
  backward(mean_all(mul(out, c)));

  std::vector<Vec> base;
  for (const auto& p : params) base.push_back(oracle::to_double(p.values()));
  auto functional = [&](const std::vector<Vec>& inputs) {
    const Vec y = ref(inputs);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * weights[i];
    return acc / static_cast<double>(y.size());
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto f = [&](const Vec& x) {
      std::vector<Vec> inputs = base;
      inputs[pi] = x;
      return functional(inputs);
    };
    const Vec fd = oracle::fd_grad(f, base[pi]);
    std::size_t bad = 0;
    const bool ok = oracle::grads_close(params[pi].grad(), fd, kAbsTol, kRelTol, &bad);
    if (!ok) {
      CAPTURE(pi);
      CAPTURE(bad);
      CAPTURE(params[pi].grad()[bad]);
      CAPTURE(fd[bad]);
    }
    CHECK(ok);
  }
}

Tensor rand_param(std::vector<int> shape, std::mt19937& rng, float lo = -2.0f, float hi = 2.0f) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  return Tensor(std::move(shape), oracle::random_floats(n, rng, lo, hi), true);
}

}  // namespace

TEST_CASE("matmul gradients") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = rand_param({3, 4}, rng);
    Tensor b = rand_param({4, 2}, rng);
    const auto w = oracle::random_floats(6, rng);
    check_op_grads({a, b}, w, [&] { return matmul(a, b); },
                   [&](const std::vector<Vec>& in) { return oracle::matmul(in[0], in[1], 3, 4, 2); });
  }
}

TEST_CASE("elementwise add/sub/mul gradients") {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor a = rand_param({2, 5}, rng);
    Tensor b = rand_param({2, 5}, rng);
    const auto w = oracle::random_floats(10, rng);
    check_op_grads({a, b}, w, [&] { return add(a, b); },
                   [&](const std::vector<Vec>& in) {
                     Vec y(in[0].size());
                     for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[0][i] + in[1][i];
                     return y;
                   });
    check_op_grads({a, b}, w, [&] { return sub(a, b); },
                   [&](const std::vector<Vec>& in) {
                     Vec y(in[0].size());
                     for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[0][i] - in[1][i];
                     return y;
                   });
    check_op_grads({a, b}, w, [&] { return mul(a, b); },
                   [&](const std::vector<Vec>& in) {
                     Vec y(in[0].size());
                     for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[0][i] * in[1][i];
                     return y;
                   });
  }
}

TEST_CASE("row-broadcast bias add gradients") {
  std::mt19937 rng(13);
  Tensor a = rand_param({4, 3}, rng);
  Tensor b = rand_param({3}, rng);
  const auto w = oracle::random_floats(12, rng);
  check_op_grads({a, b}, w, [&] { return add(a, b); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(in[0].size());
                   for (int i = 0; i < 4; ++i)
                     for (int j = 0; j < 3; ++j) y[i * 3 + j] = in[0][i * 3 + j] + in[1][j];
                   return y;
                 });
}

TEST_CASE("scale, relu, log, exp gradients") {
  std::mt19937 rng(14);
  Tensor a = rand_param({3, 3}, rng);
  const auto w = oracle::random_floats(9, rng);
  check_op_grads({a}, w, [&] { return scale(a, -1.7f); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(in[0]);
                   for (auto& v : y) v *= -1.7;
                   return y;
                 });
  // keep relu inputs away from the kink
  for (auto& v : a.values()) {
    if (std::abs(v) < 0.05f) v = 0.1f;
  }
  check_op_grads({a}, w, [&] { return relu(a); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(in[0]);
                   for (auto& v : y) v = v > 0 ? v : 0.0;
                   return y;
                 });
  Tensor pos = rand_param({3, 3}, rng, 0.5f, 2.5f);
  check_op_grads({pos}, w, [&] { return gtn::log(pos); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(in[0]);
                   for (auto& v : y) v = std::log(v);
                   return y;
                 });
  check_op_grads({a}, w, [&] { return gtn::exp(a); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(in[0]);
                   for (auto& v : y) v = std::exp(v);
                   return y;
                 });
}

TEST_CASE("reduction gradients") {
  std::mt19937 rng(15);
  Tensor a = rand_param({4, 5}, rng);
  check_op_grads({a}, {1.0f}, [&] { return mean_all(a); },
                 [&](const std::vector<Vec>& in) {
                   double s = 0.0;
                   for (double v : in[0]) s += v;
                   return Vec{s / static_cast<double>(in[0].size())};
                 });
  const auto w = oracle::random_floats(4, rng);
  check_op_grads({a}, w, [&] { return sum_cols(a); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(4, 0.0);
                   for (int i = 0; i < 4; ++i)
                     for (int j = 0; j < 5; ++j) y[static_cast<std::size_t>(i)] += in[0][i * 5 + j];
                   return y;
                 });
}

TEST_CASE("log_softmax gradients") {
  std::mt19937 rng(16);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = rand_param({3, 6}, rng, -4.0f, 4.0f);
    const auto w = oracle::random_floats(18, rng);
    check_op_grads({a}, w, [&] { return log_softmax(a); },
                   [&](const std::vector<Vec>& in) { return oracle::log_softmax(in[0], 3, 6); });
  }
}

TEST_CASE("gather gradients") {
  std::mt19937 rng(17);
  Tensor a = rand_param({4, 3}, rng);
  const std::vector<int> idx = {2, 0, 1, 2};
  const auto w = oracle::random_floats(4, rng);
  check_op_grads({a}, w, [&] { return gather_cols(a, idx); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(4);
                   for (int i = 0; i < 4; ++i) y[static_cast<std::size_t>(i)] = in[0][i * 3 + idx[static_cast<std::size_t>(i)]];
                   return y;
                 });
  CHECK_THROWS_AS(gather_cols(a, {0, 1, 2, 3}), std::out_of_range);
}

TEST_CASE("conv2d gradients with stride and padding") {
  std::mt19937 rng(18);
  for (const auto& [stride, pad] : std::vector<std::pair<int, int>>{{1, 1}, {2, 1}, {1, 0}}) {
    Tensor x = rand_param({2, 2, 4, 4}, rng);
    Tensor k = rand_param({3, 2, 3, 3}, rng, -0.7f, 0.7f);
    Tensor b = rand_param({3}, rng);
    const int ho = (4 + 2 * pad - 3) / stride + 1;
    const int wo = ho;
    const auto w = oracle::random_floats(static_cast<std::size_t>(2 * 3 * ho * wo), rng);
    const int s = stride, p = pad;
    check_op_grads({x, k, b}, w, [&] { return conv2d(x, k, b, s, p); },
                   [&](const std::vector<Vec>& in) {
                     return oracle::conv2d(in[0], in[1], in[2], 2, 2, 4, 4, 3, 3, 3, s, p);
                   });
  }
}

TEST_CASE("global average pool gradients") {
  std::mt19937 rng(19);
  Tensor x = rand_param({2, 3, 2, 2}, rng);
  const auto w = oracle::random_floats(6, rng);
  check_op_grads({x}, w, [&] { return global_avg_pool(x); },
                 [&](const std::vector<Vec>& in) {
                   Vec y(6, 0.0);
                   for (int n = 0; n < 2; ++n)
                     for (int c = 0; c < 3; ++c) {
                       double s = 0.0;
                       for (int i = 0; i < 4; ++i) s += in[0][(n * 3 + c) * 4 + i];
                       y[static_cast<std::size_t>(n * 3 + c)] = s / 4.0;
                     }
                   return y;
                 });
}
