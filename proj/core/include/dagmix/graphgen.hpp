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
#include <string>
#include <vector>

#include "dagmix/networks.hpp"
#include "dagmix/numerics/tensor.hpp"
#include "dagmix/rng.hpp"

// Dynamic graph generation: observation embeddings, a Bi-GRU over each
// agent's pairwise sequence, and hard Gumbel-softmax edge sampling.
namespace dagmix::graphgen {

using numerics::Tensor;

enum class NoiseMode {
  // softmax((a + log(lambda * exp(-lambda * a))) / tau), no random variate
  kLiteral,
  // softmax((a + g) / tau) with g ~ Gumbel(0, 1)
  kStandardGumbel,
};

std::string to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& text);

struct GraphGenConfig {
  std::int64_t obs_dim = 0;
  std::int64_t embed_dim = 32;
  std::int64_t hidden = 32;  // per direction
  double tau = 0.5;
  double lambda = 1.0;
  NoiseMode noise_mode = NoiseMode::kStandardGumbel;
};

struct GraphGenerator {
  networks::Mlp embed;          // obs -> E
  networks::GruCell forward;    // input 2E
  networks::GruCell backward;   // input 2E
  networks::Linear head;        // 2H -> 2 logits
  double tau = 0.5;
  double lambda = 1.0;
  NoiseMode noise_mode = NoiseMode::kStandardGumbel;

  std::int64_t embed_dim() const { return embed.out_features(); }
};

GraphGenerator make_graph_generator(const GraphGenConfig& config, Rng& rng);
void collect_params(const GraphGenerator& gen, const std::string& prefix,
                    numerics::ParamList& out);

// Single graph, entries (i, j) with i the receiving agent.
struct AdjacencyMatrix {
  std::int64_t n = 0;
  std::vector<double> entries;  // row-major n x n
  bool hard = true;

  double at(std::int64_t i, std::int64_t j) const {
    return entries[static_cast<std::size_t>(i * n + j)];
  }
  Tensor to_tensor() const;
};

AdjacencyMatrix full_adjacency(std::int64_t n);
// [batch, n, n] of ones.
Tensor full_adjacency(std::int64_t batch, std::int64_t n);
AdjacencyMatrix to_adjacency(const Tensor& adjacency);

// obs: [..., n, O] -> [..., n, E], one MLP shared by every agent.
Tensor embed_observations(const GraphGenerator& gen, const Tensor& obs);

// x: [n, E] -> [n, n, 2] or [M, n, E] -> [M, n, n, 2]. Row i encodes the
// sequence ((x_i, x_0), ..., (x_i, x_{n-1})) with the Bi-GRU; entry (i, j) is
// the head applied to position j.
Tensor pairwise_logits(const GraphGenerator& gen, const Tensor& x);

struct SampledGraph {
  // Hard 0/1 values with forced self-loops; gradients flow straight through
  // to the off-diagonal soft edge probabilities.
  Tensor adjacency;      // [..., n, n]
  // Tempered softmax over each pair's two logits.
  Tensor probabilities;  // [..., n, n, 2]
};

// Noise for graph m of the batch is drawn from CounterStream(row_keys[m]);
// rank-3 logits are treated as a batch of one.
SampledGraph sample_adjacency(const GraphGenerator& gen, const Tensor& logits,
                              std::span<const std::uint64_t> row_keys);
SampledGraph sample_adjacency(const GraphGenerator& gen, const Tensor& logits, Rng& rng);

// embed -> pairwise logits -> sample, for obs [M, n, O].
SampledGraph generate(const GraphGenerator& gen, const Tensor& obs,
                      std::span<const std::uint64_t> row_keys);

// Fraction of zero off-diagonal entries, averaged over the batch. 0 for n=1.
double sparsity(const Tensor& adjacency);

}  // namespace dagmix::graphgen
