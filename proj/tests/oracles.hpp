// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations, independent of the library's tape and
// float arithmetic: straight double-precision math plus central finite
// differences over it. Gradient checks compare the engine's analytic
// gradients against finite differences of these references.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec to_double(const std::vector<float>& v) { return Vec(v.begin(), v.end()); }

// --- reference ops ---------------------------------------------------------

inline Vec matmul(const Vec& a, const Vec& b, int m, int k, int n) {
  Vec out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < n; ++j) out[i * n + j] += a[i * k + p] * b[p * n + j];
  return out;
}

inline Vec log_softmax(const Vec& z, int rows, int cols) {
  Vec out(z.size());
  for (int r = 0; r < rows; ++r) {
    double mx = z[r * cols];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, z[r * cols + c]);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) sum += std::exp(z[r * cols + c] - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < cols; ++c) out[r * cols + c] = z[r * cols + c] - lse;
  }
  return out;
}

inline Vec softmax_t(const Vec& z, int rows, int cols, double temperature) {
  Vec scaled(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) scaled[i] = z[i] / temperature;
  Vec ls = log_softmax(scaled, rows, cols);
  for (auto& v : ls) v = std::exp(v);
  return ls;
}

inline Vec conv2d(const Vec& x, const Vec& w, const Vec& b, int n, int ci, int h, int wd, int co,
                  int kh, int kw, int stride, int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  Vec out(static_cast<std::size_t>(n) * co * ho * wo, 0.0);
  for (int in = 0; in < n; ++in)
    for (int oc = 0; oc < co; ++oc)
      for (int oi = 0; oi < ho; ++oi)
        for (int oj = 0; oj < wo; ++oj) {
          double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(oc)];
          for (int c = 0; c < ci; ++c)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int i = oi * stride - pad + ki, j = oj * stride - pad + kj;
                if (i < 0 || i >= h || j < 0 || j >= wd) continue;
                acc += x[((in * ci + c) * h + i) * wd + j] * w[((oc * ci + c) * kh + ki) * kw + kj];
              }
          out[((in * co + oc) * ho + oi) * wo + oj] = acc;
        }
  return out;
}

// --- reference losses -------------------------------------------------------

inline double cross_entropy(const Vec& logits, const std::vector<int>& labels, int rows, int cols) {
  const Vec ls = log_softmax(logits, rows, cols);
  double sum = 0.0;
  for (int r = 0; r < rows; ++r) sum -= ls[r * cols + labels[static_cast<std::size_t>(r)]];
  return sum / rows;
}

inline double kd_kl(const Vec& z_t, const Vec& z_s, int rows, int cols, double T) {
  Vec st(z_t.size()), ss(z_s.size());
  for (std::size_t i = 0; i < z_t.size(); ++i) {
    st[i] = z_t[i] / T;
    ss[i] = z_s[i] / T;
  }
  const Vec lt = log_softmax(st, rows, cols);
  const Vec ls = log_softmax(ss, rows, cols);
  double sum = 0.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double pt = std::exp(lt[r * cols + c]);
      sum += pt * (lt[r * cols + c] - ls[r * cols + c]);
    }
  return T * T * sum / rows;
}

inline double loss_ct(const Vec& z_t, const std::vector<Vec>& branches,
                      const std::vector<int>& labels, int rows, int cols, double alpha, double T) {
  double acc = 0.0;
  for (const Vec& z_s : branches) {
    acc += cross_entropy(z_s, labels, rows, cols) + alpha * kd_kl(z_t, z_s, rows, cols, T);
  }
  return acc / static_cast<double>(branches.size()) + cross_entropy(z_t, labels, rows, cols);
}

inline double loss_phi(const Vec& z_t, const Vec& z_s, const std::vector<int>& labels, int rows,
                       int cols, double alpha, double T) {
  return cross_entropy(z_s, labels, rows, cols) - alpha * kd_kl(z_t, z_s, rows, cols, T);
}

inline double loss_kd(const Vec& z_s, const Vec& z_t, const std::vector<int>& labels, int rows,
                      int cols, double alpha, double T) {
  return cross_entropy(z_s, labels, rows, cols) + alpha * kd_kl(z_t, z_s, rows, cols, T);
}

inline double loss_dkd(const Vec& z_s, const Vec& z_t, const std::vector<int>& labels, int rows,
                       int cols, double dkd_alpha, double dkd_beta, double T) {
  const Vec pt = softmax_t(z_t, rows, cols, T);
  const Vec ps = softmax_t(z_s, rows, cols, T);
  double tckd = 0.0, nckd = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    const double pty = pt[r * cols + y], psy = ps[r * cols + y];
    tckd += pty * (std::log(pty) - std::log(psy)) +
            (1.0 - pty) * (std::log(1.0 - pty) - std::log(1.0 - psy));
    for (int c = 0; c < cols; ++c) {
      if (c == y) continue;
      const double phat_t = pt[r * cols + c] / (1.0 - pty);
      const double phat_s = ps[r * cols + c] / (1.0 - psy);
      nckd += phat_t * (std::log(phat_t) - std::log(phat_s));
    }
  }
  return T * T * (dkd_alpha * tckd + dkd_beta * nckd) / rows;
}

// --- finite differences ------------------------------------------------------

// Central differences of f at x, elementwise.
inline Vec fd_grad(const std::function<double(const Vec&)>& f, Vec x, double eps = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double hi = f(x);
    x[i] = keep - eps;
    const double lo = f(x);
    x[i] = keep;
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return g;
}

// max(abs_tol, rel_tol * |expected|) elementwise comparison.
inline bool grads_close(const std::vector<float>& analytic, const Vec& expected, double abs_tol,
                        double rel_tol, std::size_t* bad_index = nullptr) {
  if (analytic.size() != expected.size()) return false;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double tol = std::max(abs_tol, rel_tol * std::abs(expected[i]));
    if (std::abs(static_cast<double>(analytic[i]) - expected[i]) > tol) {
      if (bad_index) *bad_index = i;
      return false;
    }
  }
  return true;
}

inline std::vector<float> random_floats(std::size_t n, std::mt19937& rng, float lo = -2.0f,
                                        float hi = 2.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline std::vector<int> random_labels(std::size_t n, int classes, std::mt19937& rng) {
  std::uniform_int_distribution<int> dist(0, classes - 1);
  std::vector<int> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace oracle
