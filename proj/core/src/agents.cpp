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

#include "dagmix/agents.hpp"

#include <algorithm>

#include "dagmix/errors.hpp"
#include "dagmix/numerics/ops.hpp"

namespace dagmix::agents {

namespace nx = numerics;

AgentNet make_agent_net(const AgentNetConfig& config, Rng& rng) {
  if (config.n_agents < 1 || config.obs_dim < 1 || config.n_actions < 1) {
    throw ConfigError("agent net needs positive agent count, obs width and action count");
  }
  AgentNet net;
  net.n_agents = config.n_agents;
  net.obs_dim = config.obs_dim;
  net.n_actions = config.n_actions;
  net.input = networks::make_linear(net.input_width(), config.hidden, rng);
  net.gru = networks::make_gru(config.hidden, config.hidden, rng);
  net.head = networks::make_linear(config.hidden, config.n_actions, rng);
  return net;
}

void collect_params(const AgentNet& net, const std::string& prefix, numerics::ParamList& out) {
  networks::collect_params(net.input, prefix + ".input", out);
  networks::collect_params(net.gru, prefix + ".gru", out);
  networks::collect_params(net.head, prefix + ".head", out);
}

AgentOutput agent_q(const AgentNet& net, const Tensor& inputs, const Tensor& hidden) {
  if (inputs.rank() != 2 || inputs.dim(1) != net.input_width()) {
    throw ShapeError("agent_q: inputs " + nx::to_string(inputs.shape()) + ", expected width " +
                     std::to_string(net.input_width()));
  }
  Tensor x = nx::relu(networks::linear_forward(net.input, inputs));
  Tensor h = networks::gru_step(net.gru, x, hidden);
  return {networks::linear_forward(net.head, h), h};
}

AgentOutput agent_q(const AgentNet& net, const Tensor& obs, const Tensor& last_action_onehot,
                    const Tensor& agent_id_onehot, const Tensor& hidden) {
  if (obs.rank() != 2 || obs.dim(1) != net.obs_dim || last_action_onehot.rank() != 2 ||
      last_action_onehot.dim(1) != net.n_actions || agent_id_onehot.rank() != 2 ||
      agent_id_onehot.dim(1) != net.n_agents) {
    throw ShapeError("agent_q: obs " + nx::to_string(obs.shape()) + ", last action " +
                     nx::to_string(last_action_onehot.shape()) + ", id " +
                     nx::to_string(agent_id_onehot.shape()));
  }
  return agent_q(net, nx::concat({obs, last_action_onehot, agent_id_onehot}, 1), hidden);
}

Tensor initial_hidden(const AgentNet& net, std::int64_t batch) {
  return Tensor(nx::Shape{batch, net.hidden_size()});
}

Tensor build_inputs(const AgentNet& net, std::span<const double> obs,
                    std::span<const int> last_actions, std::int64_t episodes) {
  const std::int64_t rows = episodes * net.n_agents;
  if (static_cast<std::int64_t>(obs.size()) != rows * net.obs_dim ||
      static_cast<std::int64_t>(last_actions.size()) != rows) {
    throw ShapeError("build_inputs: inconsistent row counts");
  }
  const std::int64_t width = net.input_width();
  Tensor out(nx::Shape{rows, width});
  auto d = out.mutable_data();
  for (std::int64_t r = 0; r < rows; ++r) {
    double* row = d.data() + r * width;
    std::copy_n(obs.data() + r * net.obs_dim, net.obs_dim, row);
    const int a = last_actions[static_cast<std::size_t>(r)];
    if (a >= 0) row[net.obs_dim + a] = 1.0;
    row[net.obs_dim + net.n_actions + (r % net.n_agents)] = 1.0;
  }
  return out;
}

int greedy_action(std::span<const double> q, std::span<const std::uint8_t> avail) {
  int best = -1;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (!avail[k]) continue;
    if (best < 0 || q[k] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  if (best < 0) throw EnvError("select_actions: agent has no available action");
  return best;
}

std::vector<int> select_actions(std::span<const double> q, std::span<const std::uint8_t> avail,
                                std::int64_t n_actions, double epsilon, Rng& rng) {
  if (n_actions < 1 || q.size() != avail.size() ||
      q.size() % static_cast<std::size_t>(n_actions) != 0) {
    throw ShapeError("select_actions: q / avail shapes disagree");
  }
  const std::size_t width = static_cast<std::size_t>(n_actions);
  const std::size_t n = q.size() / width;
  std::vector<int> actions(n);
  for (std::size_t a = 0; a < n; ++a) {
    auto qa = q.subspan(a * width, width);
    auto ma = avail.subspan(a * width, width);
    const int n_avail = static_cast<int>(
        std::count_if(ma.begin(), ma.end(), [](std::uint8_t v) { return v != 0; }));
    if (n_avail == 0) throw EnvError("select_actions: agent " + std::to_string(a) +
                                     " has no available action");
    if (uniform_real(rng, 0.0, 1.0) < epsilon) {
      int pick = std::uniform_int_distribution<int>(0, n_avail - 1)(rng);
      for (std::size_t k = 0; k < width; ++k) {
        if (ma[k] && pick-- == 0) {
          actions[a] = static_cast<int>(k);
          break;
        }
      }
    } else {
      actions[a] = greedy_action(qa, ma);
    }
  }
  return actions;
}

double EpsilonSchedule::value(std::int64_t env_steps) const {
  if (anneal_steps <= 0 || env_steps >= anneal_steps) return finish;
  const double frac = static_cast<double>(env_steps) / static_cast<double>(anneal_steps);
  return start + (finish - start) * frac;
}

}  // namespace dagmix::agents
