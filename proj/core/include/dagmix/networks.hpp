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
#include <string>
#include <vector>

#include "dagmix/numerics/params.hpp"
#include "dagmix/numerics/tensor.hpp"
#include "dagmix/rng.hpp"

namespace dagmix::networks {

using numerics::ParamList;
using numerics::Tensor;

enum class Activation { kNone, kRelu, kTanh };

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  std::int64_t in_features() const { return weight.dim(0); }
  std::int64_t out_features() const { return weight.dim(1); }
};

// Weights and bias drawn from U(-1/sqrt(in), 1/sqrt(in)).
Linear make_linear(std::int64_t in, std::int64_t out, Rng& rng);
// x: [..., in] -> [..., out]
Tensor linear_forward(const Linear& layer, const Tensor& x);

struct MlpSpec {
  // widths[0] is the input width; one layer per consecutive pair.
  std::vector<std::int64_t> widths;
  std::vector<Activation> activations;  // widths.size() - 1 entries
};

struct Mlp {
  MlpSpec spec;
  std::vector<Linear> layers;

  std::int64_t in_features() const { return spec.widths.front(); }
  std::int64_t out_features() const { return spec.widths.back(); }
};

Mlp make_mlp(const MlpSpec& spec, Rng& rng);
Tensor mlp_forward(const Mlp& mlp, const Tensor& x);

// GRU cell with gates packed column-wise as [reset | update | candidate]:
//   r = sigmoid(x Wr + br + h Ur + cr)
//   z = sigmoid(x Wz + bz + h Uz + cz)
//   n = tanh(x Wn + bn + r * (h Un + cn))
//   h' = (1 - z) * n + z * h
struct GruCell {
  Tensor w_input;   // [I, 3H]
  Tensor w_hidden;  // [H, 3H]
  Tensor b_input;   // [3H]
  Tensor b_hidden;  // [3H]

  std::int64_t input_size() const { return w_input.dim(0); }
  std::int64_t hidden_size() const { return w_hidden.dim(0); }
};

// All entries from U(-1/sqrt(H), 1/sqrt(H)).
GruCell make_gru(std::int64_t input_size, std::int64_t hidden_size, Rng& rng);

Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h);
// Same recurrence with the input half precomputed: input_gates = x Wi + bi.
Tensor gru_step_projected(const GruCell& cell, const Tensor& input_gates,
                          const Tensor& h);

// seq: [L, B, I] -> [L, B, 2H]. Position t holds the forward state after
// reading elements 0..t and the backward state after reading L-1..t.
Tensor bigru_encode(const GruCell& forward, const GruCell& backward, const Tensor& seq);

// State-conditioned mixing weights: w = |MLP_w(s)| (n entries), b = MLP_b(s).
struct Hypernet {
  Mlp weights;
  Mlp bias;

  std::int64_t n_agents() const { return weights.out_features(); }
  std::int64_t state_dim() const { return weights.in_features(); }
};

struct HypernetOutput {
  Tensor weights;  // [B, n], every entry >= 0
  Tensor bias;     // [B, 1]
};

Hypernet make_hypernet(std::int64_t state_dim, std::int64_t n_agents,
                       std::int64_t hidden, Rng& rng);
HypernetOutput hypernet_forward(const Hypernet& net, const Tensor& state);

void collect_params(const Linear& layer, const std::string& prefix, ParamList& out);
void collect_params(const Mlp& mlp, const std::string& prefix, ParamList& out);
void collect_params(const GruCell& cell, const std::string& prefix, ParamList& out);
void collect_params(const Hypernet& net, const std::string& prefix, ParamList& out);

}  // namespace dagmix::networks
