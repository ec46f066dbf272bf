// SPDX-License-Identifier: Apache-2.0

#include "gtn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gtn {

namespace {

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::logic_error(std::string(op) + ": undefined operand");
}

bool any_grad(std::initializer_list<const Tensor*> ts) {
  if (!Tape::active().grad_enabled()) return false;
  for (const Tensor* t : ts) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<float> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        acc += static_cast<double>(av[i * k + p]) * bv[p * n + j];
      }
      out[i * n + j] = static_cast<float>(acc);
    }
  }
  Tensor y({m, n}, std::move(out));
  if (any_grad({&a, &b})) {
    Tape::active().record("matmul", {a, b}, y, [a, b, m, k, n](const std::vector<float>& g, GradSink& sink) {
      const auto& av = a.values();
      const auto& bv = b.values();
      if (float* ga = sink.sink_for(a)) {
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += static_cast<double>(g[i * n + j]) * bv[p * n + j];
            ga[i * k + p] += static_cast<float>(acc);
          }
        }
      }
      if (float* gb = sink.sink_for(b)) {
        for (int p = 0; p < k; ++p) {
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += static_cast<double>(av[i * k + p]) * g[i * n + j];
            gb[p * n + j] += static_cast<float>(acc);
          }
        }
      }
    });
  }
  return y;
}

namespace {

enum class EwKind { kAdd, kSub, kMul };

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
  check_defined(a, name);
  check_defined(b, name);

  // Row-broadcast form: [m,n] + [n] (add only).
  if (kind == EwKind::kAdd && a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0)) {
    const int m = a.dim(0), n = a.dim(1);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<float> out(av.size());
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
    }
    Tensor y(a.shape(), std::move(out));
    if (any_grad({&a, &b})) {
      Tape::active().record("add", {a, b}, y, [a, b, m, n](const std::vector<float>& g, GradSink& sink) {
        if (float* ga = sink.sink_for(a)) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (float* gb = sink.sink_for(b)) {
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += g[i * n + j];
            gb[j] += static_cast<float>(acc);
          }
        }
      });
    }
    return y;
  }

  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    switch (kind) {
      case EwKind::kAdd: out[i] = av[i] + bv[i]; break;
      case EwKind::kSub: out[i] = av[i] - bv[i]; break;
      case EwKind::kMul: out[i] = av[i] * bv[i]; break;
    }
  }
  Tensor y(a.shape(), std::move(out));
  if (any_grad({&a, &b})) {
    Tape::active().record(name, {a, b}, y, [a, b, kind](const std::vector<float>& g, GradSink& sink) {
      const auto& av = a.values();
      const auto& bv = b.values();
      if (float* ga = sink.sink_for(a)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += (kind == EwKind::kMul) ? g[i] * bv[i] : g[i];
        }
      }
      if (float* gb = sink.sink_for(b)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          switch (kind) {
            case EwKind::kAdd: gb[i] += g[i]; break;
            case EwKind::kSub: gb[i] -= g[i]; break;
            case EwKind::kMul: gb[i] += g[i] * av[i]; break;
          }
        }
      }
    });
  }
  return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::kMul, "mul"); }

Tensor scale(const Tensor& a, float c) {
  check_defined(a, "scale");
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  Tensor y(a.shape(), std::move(out));
  if (any_grad({&a})) {
    Tape::active().record("scale", {a}, y, [a, c](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& a) {
  check_defined(a, "relu");
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0f ? av[i] : 0.0f;
  Tensor y(a.shape(), std::move(out));
  if (any_grad({&a})) {
    Tape::active().record("relu", {a}, y, [a](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        const auto& av = a.values();
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (av[i] > 0.0f) ga[i] += g[i];
        }
      }
    });
  }
  return y;
}

Tensor log(const Tensor& a) {
  check_defined(a, "log");
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > 0.0f)) {
      throw std::domain_error("log: non-positive input " + std::to_string(av[i]));
    }
    out[i] = std::log(av[i]);
  }
  Tensor y(a.shape(), std::move(out));
  if (any_grad({&a})) {
    Tape::active().record("log", {a}, y, [a](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        const auto& av = a.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
      }
    });
  }
  return y;
}

Tensor exp(const Tensor& a) {
  check_defined(a, "exp");
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::exp(av[i]);
  Tensor y(a.shape(), std::move(out));
  if (any_grad({&a})) {
    Tape::active().record("exp", {a}, y, [a, y](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        const auto& yv = y.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
      }
    });
  }
  return y;
}

Tensor mean_all(const Tensor& a) {
  check_defined(a, "mean_all");
  const auto& av = a.values();
  double acc = 0.0;
  for (float v : av) acc += v;
  const double inv = 1.0 / static_cast<double>(av.size());
  Tensor y({1}, {static_cast<float>(acc * inv)});
  if (any_grad({&a})) {
    Tape::active().record("mean_all", {a}, y, [a, inv](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        const float gi = static_cast<float>(g[0] * inv);
        for (std::size_t i = 0; i < a.values().size(); ++i) ga[i] += gi;
      }
    });
  }
  return y;
}

Tensor sum_cols(const Tensor& a) {
  check_defined(a, "sum_cols");
  if (a.rank() != 2) throw ShapeError("sum_cols: expected rank-2, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  const auto& av = a.values();
  std::vector<float> out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += av[i * n + j];
    out[i] = static_cast<float>(acc);
  }
  Tensor y({m}, std::move(out));
  if (any_grad({&a})) {
    Tape::active().record("sum_cols", {a}, y, [a, m, n](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) ga[i * n + j] += g[i];
        }
      }
    });
  }
  return y;
}

Tensor log_softmax(const Tensor& a) {
  check_defined(a, "log_softmax");
  if (a.rank() != 2) throw ShapeError("log_softmax: expected rank-2, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  const auto& av = a.values();
  std::vector<float> out(av.size());
  for (int i = 0; i < m; ++i) {
    float mx = av[i * n];
    for (int j = 1; j < n; ++j) mx = std::max(mx, av[i * n + j]);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += std::exp(static_cast<double>(av[i * n + j]) - mx);
    const float lse = mx + static_cast<float>(std::log(acc));
    for (int j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] - lse;
  }
  Tensor y(a.shape(), std::move(out));
  if (any_grad({&a})) {
    Tape::active().record("log_softmax", {a}, y, [a, y, m, n](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        const auto& yv = y.values();
        for (int i = 0; i < m; ++i) {
          double gsum = 0.0;
          for (int j = 0; j < n; ++j) gsum += g[i * n + j];
          for (int j = 0; j < n; ++j) {
            const double p = std::exp(static_cast<double>(yv[i * n + j]));
            ga[i * n + j] += static_cast<float>(g[i * n + j] - p * gsum);
          }
        }
      }
    });
  }
  return y;
}

Tensor gather_cols(const Tensor& a, const std::vector<int>& index) {
  check_defined(a, "gather_cols");
  if (a.rank() != 2) throw ShapeError("gather_cols: expected rank-2, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  if (static_cast<int>(index.size()) != m) {
    throw ShapeError("gather_cols: " + std::to_string(index.size()) + " indices for " +
                     std::to_string(m) + " rows");
  }
  for (int i = 0; i < m; ++i) {
    if (index[i] < 0 || index[i] >= n) {
      throw std::out_of_range("gather_cols: index " + std::to_string(index[i]) +
                              " out of range for " + std::to_string(n) + " columns");
    }
  }
  const auto& av = a.values();
  std::vector<float> out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out[i] = av[i * n + index[i]];
  Tensor y({m}, std::move(out));
  if (any_grad({&a})) {
    Tape::active().record("gather_cols", {a}, y, [a, index, m, n](const std::vector<float>& g, GradSink& sink) {
      if (float* ga = sink.sink_for(a)) {
        for (int i = 0; i < m; ++i) ga[i * n + index[i]] += g[i];
      }
    });
  }
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  check_defined(x, "conv2d");
  check_defined(w, "conv2d");
  if (x.rank() != 4 || w.rank() != 4) {
    throw ShapeError("conv2d: x " + shape_str(x.shape()) + ", w " + shape_str(w.shape()));
  }
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d: bad stride/padding");
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != ci) {
    throw ShapeError("conv2d: input channels " + std::to_string(ci) + " vs kernel " +
                     std::to_string(w.dim(1)));
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != co)) {
    throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " for " + std::to_string(co) +
                     " output channels");
  }
  const int ho = (h + 2 * padding - kh) / stride + 1;
  const int wo = (wd + 2 * padding - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " too large for input " +
                     shape_str(x.shape()));
  }

  const auto& xv = x.values();
  const auto& wv = w.values();
  std::vector<float> out(static_cast<std::size_t>(n) * co * ho * wo);
  auto xat = [&](int in, int c, int i, int j) -> double {
    if (i < 0 || i >= h || j < 0 || j >= wd) return 0.0;
    return xv[((in * ci + c) * h + i) * wd + j];
  };
  for (int in = 0; in < n; ++in) {
    for (int oc = 0; oc < co; ++oc) {
      const double bias = b.defined() ? b.values()[oc] : 0.0;
      for (int oi = 0; oi < ho; ++oi) {
        for (int oj = 0; oj < wo; ++oj) {
          double acc = bias;
          for (int c = 0; c < ci; ++c) {
            for (int ki = 0; ki < kh; ++ki) {
              for (int kj = 0; kj < kw; ++kj) {
                acc += xat(in, c, oi * stride - padding + ki, oj * stride - padding + kj) *
                       wv[((oc * ci + c) * kh + ki) * kw + kj];
              }
            }
          }
          out[((in * co + oc) * ho + oi) * wo + oj] = static_cast<float>(acc);
        }
      }
    }
  }
  Tensor y({n, co, ho, wo}, std::move(out));
  if (any_grad({&x, &w, &b})) {
    std::vector<Tensor> inputs = {x, w};
    if (b.defined()) inputs.push_back(b);
    Tape::active().record(
        "conv2d", inputs, y,
        [x, w, b, stride, padding, n, ci, h, wd, co, kh, kw, ho, wo](const std::vector<float>& g, GradSink& sink) {
          const auto& xv = x.values();
          const auto& wv = w.values();
          float* gx = sink.sink_for(x);
          float* gw = sink.sink_for(w);
          float* gb = b.defined() ? sink.sink_for(b) : nullptr;
          for (int in = 0; in < n; ++in) {
            for (int oc = 0; oc < co; ++oc) {
              for (int oi = 0; oi < ho; ++oi) {
                for (int oj = 0; oj < wo; ++oj) {
                  const float go = g[((in * co + oc) * ho + oi) * wo + oj];
                  if (go == 0.0f) continue;
                  if (gb) gb[oc] += go;
                  for (int c = 0; c < ci; ++c) {
                    for (int ki = 0; ki < kh; ++ki) {
                      const int i = oi * stride - padding + ki;
                      if (i < 0 || i >= h) continue;
                      for (int kj = 0; kj < kw; ++kj) {
                        const int j = oj * stride - padding + kj;
                        if (j < 0 || j >= wd) continue;
                        const std::size_t xi = ((static_cast<std::size_t>(in) * ci + c) * h + i) * wd + j;
                        const std::size_t wi = ((static_cast<std::size_t>(oc) * ci + c) * kh + ki) * kw + kj;
                        if (gx) gx[xi] += go * wv[wi];
                        if (gw) gw[wi] += go * xv[xi];
                      }
                    }
                  }
                }
              }
            }
          }
        });
  }
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  check_defined(x, "global_avg_pool");
  if (x.rank() != 4) throw ShapeError("global_avg_pool: expected rank-4, got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto& xv = x.values();
  const double inv = 1.0 / (static_cast<double>(h) * w);
  std::vector<float> out(static_cast<std::size_t>(n) * c);
  for (int in = 0; in < n; ++in) {
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      const std::size_t base = (static_cast<std::size_t>(in) * c + ch) * h * w;
      for (int i = 0; i < h * w; ++i) acc += xv[base + i];
      out[in * c + ch] = static_cast<float>(acc * inv);
    }
  }
  Tensor y({n, c}, std::move(out));
  if (any_grad({&x})) {
    Tape::active().record("global_avg_pool", {x}, y, [x, n, c, h, w, inv](const std::vector<float>& g, GradSink& sink) {
      if (float* gx = sink.sink_for(x)) {
        for (int in = 0; in < n; ++in) {
          for (int ch = 0; ch < c; ++ch) {
            const float gi = static_cast<float>(g[in * c + ch] * inv);
            const std::size_t base = (static_cast<std::size_t>(in) * c + ch) * h * w;
            for (int i = 0; i < h * w; ++i) gx[base + i] += gi;
          }
        }
      }
    });
  }
  return y;
}

Tensor softmax_temperature(const Tensor& z, float temperature) {
  if (!(temperature > 0.0f)) {
    throw std::invalid_argument("softmax_temperature: temperature must be positive, got " +
                                std::to_string(temperature));
  }
  return exp(log_softmax(scale(z, 1.0f / temperature)));
}

}  // namespace gtn
