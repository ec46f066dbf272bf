// SPDX-License-Identifier: Apache-2.0
//
// The closed primitive set of the differentiation core. Everything else in
// the library is composed from these.

#pragma once

#include <vector>

#include "gtn/tensor.hpp"

namespace gtn {

// [m,k] x [k,n] -> [m,n]. Inner products accumulate in double.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise add of equal shapes, or row-broadcast [m,n] + [n].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, float c);
Tensor relu(const Tensor& a);

// Elementwise natural log / exp. log requires strictly positive input.
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);

// Mean over every element -> scalar. Double accumulation.
Tensor mean_all(const Tensor& a);

// [m,n] -> [m], summing the class axis. Double accumulation.
Tensor sum_cols(const Tensor& a);

// Row-wise stable log-softmax over [m,n] (max subtraction form).
Tensor log_softmax(const Tensor& a);

// out[r] = a[r, index[r]] for [m,n] with m labels.
Tensor gather_cols(const Tensor& a, const std::vector<int>& index);

// x:[n,ci,h,w]  w:[co,ci,kh,kw]  b:[co] (optional, pass undefined to skip).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);

// [n,c,h,w] -> [n,c], mean over the spatial grid.
Tensor global_avg_pool(const Tensor& x);

// softmax(z / T) row-wise, computed as exp(log_softmax(z / T)).
// Rows sum to 1 within 1e-6; rejects T <= 0.
Tensor softmax_temperature(const Tensor& z, float temperature);

}  // namespace gtn
