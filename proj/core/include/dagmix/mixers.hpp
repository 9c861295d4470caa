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

#include "dagmix/networks.hpp"
#include "dagmix/numerics/tensor.hpp"
#include "dagmix/rng.hpp"

// Value mixing: individual Q-values -> Q_tot.
namespace dagmix::mixers {

using numerics::Tensor;

enum class MixerKind { kVdn, kQmix, kDagmix, kDagvdn, kFcgmix };

std::string to_string(MixerKind kind);
// Accepts the lower-case CLI names; throws ConfigError listing valid kinds.
MixerKind parse_mixer_kind(const std::string& text);
const std::vector<MixerKind>& all_mixer_kinds();

// DAGMIX and DAGVDN consume a freshly sampled dynamic graph.
bool uses_dynamic_graph(MixerKind kind);
bool uses_attention(MixerKind kind);
bool uses_hypernet(MixerKind kind);

struct AttentionParams {
  Tensor w_query;  // [E, d_k]
  Tensor w_key;    // [E, d_k]

  std::int64_t key_dim() const { return w_key.dim(1); }
  std::int64_t embed_dim() const { return w_key.dim(0); }
};

AttentionParams make_attention(std::int64_t embed_dim, std::int64_t key_dim, Rng& rng);

struct AttentionOutput {
  Tensor mixed;    // [M, n]: Q'_a = sum_i w_ai Q_i
  Tensor weights;  // [M, n, n], zero outside each neighbourhood
};

// x: [M, n, E], adjacency: [M, n, n] hard, q_values: [M, n]. Scores
// (X Wq)(X Wk)^T / sqrt(d_k) are masked by the adjacency and row-softmaxed.
// Rank-2 x / adjacency and rank-1 q_values are accepted as a batch of one.
AttentionOutput masked_attention_mix(const AttentionParams& params, const Tensor& x,
                                     const Tensor& adjacency, const Tensor& q_values);

// Classic QMIX mixing with a state-conditioned ELU hidden layer.
struct TwoStageMixing {
  networks::Mlp hyper_w1;  // state -> n * embed
  networks::Linear hyper_b1;
  networks::Mlp hyper_w2;  // state -> embed
  networks::Mlp value;     // state -> 1
  std::int64_t embed = 0;
};

struct MixerConfig {
  MixerKind kind = MixerKind::kDagmix;
  std::int64_t n_agents = 0;
  std::int64_t obs_dim = 0;
  std::int64_t state_dim = 0;
  std::int64_t embed_dim = 32;
  std::int64_t key_dim = 32;
  std::int64_t hypernet_hidden = 64;
  bool two_stage = false;
  std::int64_t two_stage_embed = 32;
};

// Every kind carries the full parameter set so that kinds can be compared on
// identical weights; unused parts simply receive no gradient.
struct Mixer {
  MixerKind kind = MixerKind::kDagmix;
  networks::Mlp encoder;  // obs -> E, owned by the mixer
  AttentionParams attention;
  networks::Hypernet hypernet;
  bool two_stage = false;
  TwoStageMixing classic;

  std::int64_t n_agents() const { return hypernet.n_agents(); }
};

Mixer make_mixer(const MixerConfig& config, Rng& rng);
void collect_params(const Mixer& mixer, const std::string& prefix, numerics::ParamList& out);

// q_prime: [M, n], state: [M, S] -> [M].  Q_tot = sum_a w_a Q'_a + b.
Tensor qmix_combine(const networks::Hypernet& hypernet, const Tensor& q_prime,
                    const Tensor& state);
Tensor qmix_combine_two_stage(const TwoStageMixing& mixing, const Tensor& q_prime,
                              const Tensor& state);
// [M, n] -> [M]
Tensor vdn_combine(const Tensor& q_values);

struct MixInputs {
  Tensor q_values;    // [M, n] chosen-action values
  Tensor embeddings;  // [M, n, E] from encode_observations (attention kinds)
  Tensor adjacency;   // [M, n, n] sampled graph (DAGMIX / DAGVDN)
  Tensor state;       // [M, S] (hypernet kinds)
};

struct MixOutput {
  Tensor q_total;            // [M]
  Tensor attention_weights;  // [M, n, n]; undefined for VDN / QMIX
};

Tensor encode_observations(const Mixer& mixer, const Tensor& obs);

MixOutput mix(MixerKind kind, const Mixer& mixer, const MixInputs& inputs);
inline MixOutput mix(const Mixer& mixer, const MixInputs& inputs) {
  return mix(mixer.kind, mixer, inputs);
}

// Q_tot(Q_a + delta) - Q_tot(Q_a) for every (row, agent), row-major [M * n],
// with embeddings, adjacency and state held fixed.
std::vector<double> monotonicity_probe(MixerKind kind, const Mixer& mixer,
                                       const MixInputs& inputs, double delta);

// Mean attention entropy per receiving agent over the batch.
std::vector<double> attention_entropy(const Tensor& weights);

}  // namespace dagmix::mixers
