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

// Test-only reference implementations. Everything here is written with plain
// loops over std::vector and reads parameters out of tensors by value, so it
// shares no arithmetic with the library under test.

#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "dagmix/agents.hpp"
#include "dagmix/graphgen.hpp"
#include "dagmix/mixers.hpp"
#include "dagmix/networks.hpp"
#include "dagmix/numerics/params.hpp"
#include "dagmix/numerics/tensor.hpp"
#include "dagmix/rng.hpp"

namespace dagmix::oracle {

using numerics::Tensor;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Vec values(const Tensor& t);
Mat rows(const Tensor& t);  // rank 2

Vec affine(const Vec& x, const Mat& w, const Vec& b);  // x W + b
Vec linear(const networks::Linear& layer, const Vec& x);
Vec mlp(const networks::Mlp& net, const Vec& x);
Vec gru(const networks::GruCell& cell, const Vec& x, const Vec& h);

// out[t] = [forward hidden after 0..t, backward hidden after L-1..t]
std::vector<Vec> bigru(const networks::GruCell& fwd, const networks::GruCell& bwd,
                       const std::vector<Vec>& seq);

struct HypernetValues {
  Vec weights;
  double bias = 0.0;
};
HypernetValues hypernet(const networks::Hypernet& net, const Vec& state);

// logits[i][j] = head(bigru over ((x_i, x_0), ..., (x_i, x_{n-1})) at j)
std::vector<std::vector<Vec>> pairwise_logits(const graphgen::GraphGenerator& gen,
                                              const std::vector<Vec>& x);

// Gumbel(0, 1) draw for entry `counter` of the stream keyed by `key`.
double gumbel(std::uint64_t key, std::uint64_t counter);

struct SampledGraph {
  Mat adjacency;                        // hard, diagonal forced to 1
  std::vector<std::vector<Vec>> probs;  // [i][j] -> tempered softmax pair
};
SampledGraph sample(const graphgen::GraphGenerator& gen,
                    const std::vector<std::vector<Vec>>& logits, std::uint64_t key);

struct Attention {
  Vec mixed;
  Mat weights;
};
Attention attention(const mixers::AttentionParams& params, const std::vector<Vec>& x,
                    const Mat& adjacency, const Vec& q);

struct DagmixForward {
  Mat adjacency;
  Attention attention;
  double q_total = 0.0;
};
// obs -> graph embeddings -> pairwise Bi-GRU -> Gumbel hard sample -> masked
// attention over mixer embeddings -> |w| . Q' + b
DagmixForward dagmix_forward(const graphgen::GraphGenerator& gen, const mixers::Mixer& mixer,
                             const std::vector<Vec>& obs, const Vec& state, const Vec& q,
                             std::uint64_t key);

// Agent network for one agent, one step.
struct AgentStep {
  Vec q;
  Vec hidden;
};
AgentStep agent_step(const agents::AgentNet& net, const Vec& obs, int last_action, int agent,
                     const Vec& hidden);

// Gradient checking ---------------------------------------------------------

struct GradCheck {
  double max_rel_error = 0.0;
  std::int64_t entries = 0;
};

// Central differences of `loss` w.r.t. every entry of `inputs`, compared with
// the tape gradient. Relative error per entry is |a - f| / max(|a|, |f|, 1e-6).
GradCheck check_gradients(const std::function<Tensor()>& loss,
                          const std::vector<Tensor>& inputs, double h = 1e-5);

Tensor random_tensor(numerics::Shape shape, Rng& rng, double bound = 1.0,
                     bool requires_grad = true);
void randomize(const numerics::ParamList& params, Rng& rng, double bound);

// Fixed pseudo-random linear functional of `t`, so a tensor-valued block can
// be checked through a scalar loss.
Tensor probe(const Tensor& t, std::uint64_t seed);

}  // namespace dagmix::oracle
