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

// Decentralised recurrent Q-network shared by all agents.
namespace dagmix::agents {

using numerics::Tensor;

struct AgentNetConfig {
  std::int64_t n_agents = 0;
  std::int64_t obs_dim = 0;
  std::int64_t n_actions = 0;
  std::int64_t hidden = 64;
};

// obs ++ last-action one-hot ++ agent-id one-hot -> relu(Linear) -> GRU -> Linear
struct AgentNet {
  networks::Linear input;
  networks::GruCell gru;
  networks::Linear head;
  std::int64_t n_agents = 0;
  std::int64_t obs_dim = 0;
  std::int64_t n_actions = 0;

  std::int64_t input_width() const { return obs_dim + n_actions + n_agents; }
  std::int64_t hidden_size() const { return gru.hidden_size(); }
};

AgentNet make_agent_net(const AgentNetConfig& config, Rng& rng);
void collect_params(const AgentNet& net, const std::string& prefix, numerics::ParamList& out);

struct AgentOutput {
  Tensor q;       // [B, n_actions]
  Tensor hidden;  // [B, H]
};

AgentOutput agent_q(const AgentNet& net, const Tensor& obs, const Tensor& last_action_onehot,
                    const Tensor& agent_id_onehot, const Tensor& hidden);
// inputs: [B, input_width()] already concatenated.
AgentOutput agent_q(const AgentNet& net, const Tensor& inputs, const Tensor& hidden);

Tensor initial_hidden(const AgentNet& net, std::int64_t batch);

// Rows (episode, agent) for `episodes` episodes: obs is [episodes * n, O];
// last_actions holds one entry per row, -1 meaning "no previous action".
Tensor build_inputs(const AgentNet& net, std::span<const double> obs,
                    std::span<const int> last_actions, std::int64_t episodes);

// Per agent: with probability epsilon a uniformly random available action,
// otherwise the available action with the highest q (lowest index on ties).
// q and avail are row-major [n, n_actions]. Uses nothing but local values.
std::vector<int> select_actions(std::span<const double> q, std::span<const std::uint8_t> avail,
                                std::int64_t n_actions, double epsilon, Rng& rng);
int greedy_action(std::span<const double> q, std::span<const std::uint8_t> avail);

// Linear decay from start to finish over anneal_steps environment steps.
struct EpsilonSchedule {
  double start = 1.0;
  double finish = 0.05;
  std::int64_t anneal_steps = 50000;

  double value(std::int64_t env_steps) const;
};

}  // namespace dagmix::agents
