// Copyright 2026 The dagmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dagmix/numerics/tensor.hpp"

// Differentiable primitives. Binary elementwise ops follow numpy
// broadcasting (right-aligned, size-1 dimensions stretch).
namespace dagmix::numerics {

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor bmm(const Tensor& a, const Tensor& b);     // [B,m,k] x [B,k,n]

// x [m,k] w [k,n] + b [n] in one step.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// One GRU update with packed [reset | update | candidate] gates.
// input_gates [B,3H] is x W_i + b_i, h [B,H], w_hidden [H,3H], b_hidden [3H].
// h' = n + z * (h - n), n = tanh(i_n + r * (h W_hn + b_hn)).
Tensor gru_cell(const Tensor& input_gates, const Tensor& h, const Tensor& w_hidden,
                const Tensor& b_hidden);

// gru_cell with input_gates = pair_sum(rows, cols, j), without materialising them.
Tensor gru_cell_pair(const Tensor& rows, const Tensor& cols, std::int64_t j, const Tensor& h,
                     const Tensor& w_hidden, const Tensor& b_hidden);

// rows, cols [M, n, G] -> [M * n, G] with out[m * n + i] = rows[m, i] + cols[m, j].
Tensor pair_sum(const Tensor& rows, const Tensor& cols, std::int64_t j);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::int64_t begin, std::int64_t end);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a, int axis0 = -2, int axis1 = -1);

Tensor sum(const Tensor& a, int axis, bool keepdim = false);
Tensor mean(const Tensor& a, int axis, bool keepdim = false);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

struct MaxResult {
  Tensor values;
  // Flattened argmax per reduced slice; ties go to the lowest index.
  std::vector<std::int64_t> indices;
};
MaxResult max(const Tensor& a, int axis);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor abs(const Tensor& a);

// Entries where `keep` is zero are replaced by `value` (no gradient flows to
// them). `keep` must have the shape of `a`.
Tensor masked_fill(const Tensor& a, const Tensor& keep, double value);

// Value written into masked logits before normalisation.
inline constexpr double kMaskedLogit = -1e30;

// Max-subtracted softmax along `axis`. With a mask, entries whose `keep`
// value is zero come out exactly 0 and receive exactly zero gradient. A slice
// with nothing kept throws EmptyNeighborhoodError.
Tensor softmax(const Tensor& logits, int axis, const Tensor* keep = nullptr);

// out[k] = a[indices[k]] along the first axis; repeated indices accumulate.
Tensor take_rows(const Tensor& a, std::span<const std::int64_t> indices);

// out[..] = a[.., indices[flat(..)]] along the last axis.
Tensor gather_last(const Tensor& a, std::span<const std::int64_t> indices);

// Forward value taken from `values` (not differentiated); the incoming
// gradient is passed unchanged to `gradient_path`.
Tensor straight_through(const Tensor& values, const Tensor& gradient_path);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace dagmix::numerics
