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
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dagmix/agents.hpp"
#include "dagmix/config.hpp"
#include "dagmix/envs.hpp"
#include "dagmix/graphgen.hpp"
#include "dagmix/mixers.hpp"
#include "dagmix/numerics/rmsprop.hpp"
#include "dagmix/rng.hpp"

namespace dagmix::training {

using numerics::Tensor;

struct ModelConfig {
  mixers::MixerKind kind = mixers::MixerKind::kDagmix;
  std::int64_t n_agents = 0;
  std::int64_t obs_dim = 0;
  std::int64_t state_dim = 0;
  std::int64_t n_actions = 0;
  std::int64_t agent_hidden = 64;
  graphgen::GraphGenConfig graph;
  mixers::MixerConfig mixer;
};

ModelConfig model_config_for(const RunConfig& config, const envs::DecPomdpEnv& env);

// Every learnable parameter: agent net, graph generator, mixer (incl.
// hypernetworks). One optimiser covers all of them.
struct Model {
  ModelConfig config;
  agents::AgentNet agent;
  graphgen::GraphGenerator graph;
  mixers::Mixer mixer;

  // Stable order, prefixed "agent.", "graph.", "mixer.".
  numerics::ParamList params() const;
};

Model make_model(const ModelConfig& config, Rng& rng);
// Independent copy with identical values.
Model clone_model(const Model& model);

// One recorded trajectory. Observations and states are stored in float to
// keep long buffers in memory; rewards stay double.
struct Episode {
  std::int64_t length = 0;  // transitions
  std::int64_t n_agents = 0, obs_dim = 0, state_dim = 0, n_actions = 0;
  std::vector<float> states;            // [length + 1, S]
  std::vector<float> obs;               // [length + 1, n, O]
  std::vector<std::uint8_t> avail;      // [length + 1, n, A]
  std::vector<std::int32_t> actions;    // [length, n]
  std::vector<double> rewards;          // [length]
  std::vector<std::uint8_t> terminated; // [length]
  double episode_return = 0.0;
  bool success = false;
};

// FIFO ring of whole episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::int64_t capacity);

  void insert(Episode episode);
  std::int64_t size() const { return static_cast<std::int64_t>(episodes_.size()); }
  std::int64_t capacity() const { return capacity_; }
  std::int64_t insertions() const { return insertions_; }
  bool can_sample(std::int64_t n) const { return size() >= n; }

  // Distinct indices, uniform without replacement; index 0 is the oldest
  // stored episode.
  std::vector<std::int64_t> sample_indices(std::int64_t n, Rng& rng) const;
  std::vector<const Episode*> sample(std::int64_t n, Rng& rng) const;
  const Episode& at(std::int64_t index) const;

 private:
  std::int64_t capacity_;
  std::int64_t insertions_ = 0;
  std::deque<Episode> episodes_;
};

// Episodes padded to a common length. filled marks real transitions.
struct EpisodeBatch {
  std::int64_t batch = 0;
  std::int64_t max_len = 0;
  std::int64_t n_agents = 0, obs_dim = 0, state_dim = 0, n_actions = 0;
  std::vector<double> states;          // [B, T + 1, S]
  std::vector<double> obs;             // [B, T + 1, n, O]
  std::vector<std::uint8_t> avail;     // [B, T + 1, n, A], padding all-available
  std::vector<int> actions;            // [B, T, n], padding 0
  std::vector<double> rewards;         // [B, T]
  std::vector<double> terminated;      // [B, T]
  std::vector<double> filled;          // [B, T]
};

// pad_to = 0 pads to the longest episode.
EpisodeBatch make_batch(std::span<const Episode* const> episodes, std::int64_t pad_to = 0);

struct EpisodeStats {
  double episode_return = 0.0;
  std::int64_t length = 0;
  bool success = false;
};

// Rolls out one episode with decentralised epsilon-greedy selection. Only the
// agent network of `model` is consulted.
Episode run_episode(envs::DecPomdpEnv& env, const Model& model, double epsilon, Rng& rng);
EpisodeStats collect_episode(envs::DecPomdpEnv& env, const Model& model, double epsilon,
                             Rng& rng, ReplayBuffer& buffer);

// One noise key per (episode, t) row; independent of the batch padding.
std::vector<std::uint64_t> graph_noise_keys(std::uint64_t base, std::int64_t batch,
                                            std::int64_t steps);

// Flat indices e * T + t of the real (filled) transitions, ascending.
std::vector<std::int64_t> filled_rows(const EpisodeBatch& batch);

// Mixer outputs over the F filled rows; padding never reaches the graph or
// the mixer, it would carry zero loss weight anyway.
struct MixerPass {
  Tensor q_total;            // [F]
  Tensor adjacency;          // [F, n, n] when a graph was used
  Tensor attention_weights;  // [F, n, n] for attention kinds
};

// Q_tot(tau^t, u^t) for every filled (episode, t), differentiable.
MixerPass online_q_total(const Model& model, const EpisodeBatch& batch, std::uint64_t noise_key);

// y = r + gamma * (1 - terminated) * Q_tot(tau^{t+1}, greedy u^{t+1} | target), [F].
// Greedy actions are per-agent argmaxes of the target agent net over
// available actions; the target graph is generated by the target generator.
Tensor td_targets(const EpisodeBatch& batch, const Model& target, double gamma,
                  std::uint64_t noise_key);

struct TrainStepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
  std::optional<double> adjacency_sparsity;
  std::vector<double> attention_entropy;  // empty for VDN / QMIX
};

class Learner {
 public:
  Learner(Model online, const RunConfig& config);

  // Forward, filled-weighted squared TD error, backward and one RMSProp step.
  TrainStepResult train_step(const EpisodeBatch& batch, std::uint64_t noise_key);
  // Loss only, no parameter update.
  double evaluate_loss(const EpisodeBatch& batch, std::uint64_t noise_key) const;

  void sync_target();

  const Model& online() const { return online_; }
  Model& mutable_online() { return online_; }
  const Model& target() const { return target_; }
  Model& mutable_target() { return target_; }
  numerics::RmsProp& optimizer() { return optimizer_; }
  const numerics::RmsProp& optimizer() const { return optimizer_; }
  double gamma() const { return gamma_; }

 private:
  Model online_;
  Model target_;
  numerics::RmsProp optimizer_;
  double gamma_;
};

struct EvalSummary {
  std::vector<double> returns;
  double mean_return = 0.0;
  std::optional<double> success_rate;
};

// Greedy (epsilon = 0) episodes; nothing is stored.
EvalSummary evaluate(envs::DecPomdpEnv& env, const Model& model, std::int64_t episodes, Rng& rng);

}  // namespace dagmix::training
