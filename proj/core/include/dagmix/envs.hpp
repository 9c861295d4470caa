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

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dagmix/rng.hpp"

// Dec-POMDP environments: a common interface plus the built-in matrix game
// and cooperative gridworld.
namespace dagmix::envs {

struct EnvStep {
  std::vector<double> state;
  std::vector<double> obs;           // [n, obs_dim] row-major
  std::vector<std::uint8_t> avail;   // [n, n_actions] row-major, 1 = available
  double reward = 0.0;               // shared by every agent
  bool terminated = false;
  bool success = false;
};

class DecPomdpEnv {
 public:
  virtual ~DecPomdpEnv() = default;

  virtual std::string name() const = 0;
  virtual int n_agents() const = 0;
  virtual int state_dim() const = 0;
  virtual int obs_dim() const = 0;
  virtual int n_actions() const = 0;
  virtual int episode_limit() const = 0;
  // True when EnvStep::success carries meaning (counts toward success rate).
  virtual bool reports_success() const { return false; }

  // reward/terminated of the returned step are unset.
  virtual EnvStep reset(Rng& rng) = 0;
  // Throws EnvError for unavailable actions or stepping a finished episode.
  virtual EnvStep step(std::span<const int> actions) = 0;
};

// Two agents, one step, constant observations.
class MatrixGame : public DecPomdpEnv {
 public:
  // Row = agent 0 action, column = agent 1 action.
  explicit MatrixGame(std::vector<std::vector<double>> payoff);

  static std::vector<std::vector<double>> default_payoff();

  std::string name() const override { return "matrix"; }
  int n_agents() const override { return 2; }
  int state_dim() const override { return 1; }
  int obs_dim() const override { return 1; }
  int n_actions() const override { return static_cast<int>(payoff_.size()); }
  int episode_limit() const override { return 1; }

  EnvStep reset(Rng& rng) override;
  EnvStep step(std::span<const int> actions) override;

  const std::vector<std::vector<double>>& payoff() const { return payoff_; }

 private:
  EnvStep observe() const;

  std::vector<std::vector<double>> payoff_;
  bool done_ = true;
};

struct MatrixOptimum {
  double value = 0.0;
  std::array<int, 2> joint_action{0, 0};
};

// Exhaustive search over all joint actions; ties resolve to the first in
// row-major order.
MatrixOptimum oracle_optimal(const MatrixGame& game);

struct SpreadGridConfig {
  int grid_size = 7;
  int n_agents = 5;
  int obs_radius = 2;
  int episode_limit = 25;
  double time_penalty = 0.01;
  double collision_penalty = 0.1;
  // Nearest-first entity slots per kind in each observation.
  int max_visible = 6;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

// n agents and n landmarks on a G x G grid. Actions: 0 stay, 1 up, 2 down,
// 3 left, 4 right. Reward per step: covered landmarks / n - time penalty -
// collision penalty per colliding pair. Episodes end when every landmark is
// covered or at the episode limit.
class SpreadGrid : public DecPomdpEnv {
 public:
  explicit SpreadGrid(SpreadGridConfig config);

  std::string name() const override { return "spread"; }
  int n_agents() const override { return config_.n_agents; }
  int state_dim() const override { return 4 * config_.n_agents; }
  int obs_dim() const override;
  int n_actions() const override { return 5; }
  int episode_limit() const override { return config_.episode_limit; }
  bool reports_success() const override { return true; }

  EnvStep reset(Rng& rng) override;
  EnvStep step(std::span<const int> actions) override;

  const SpreadGridConfig& config() const { return config_; }
  const std::vector<Cell>& agents() const { return agents_; }
  const std::vector<Cell>& landmarks() const { return landmarks_; }
  int steps_taken() const { return t_; }

  // Places entities directly (tests, scripted scenarios); restarts the clock.
  EnvStep set_layout(std::vector<Cell> agents, std::vector<Cell> landmarks);

  // Observation of `agent` under the current layout.
  std::vector<double> observe(int agent) const;
  int covered_landmarks() const;

 private:
  EnvStep snapshot() const;

  SpreadGridConfig config_;
  std::vector<Cell> agents_;
  std::vector<Cell> landmarks_;
  int t_ = 0;
  bool done_ = true;
};

// Named scenarios: matrix, spread5, spread8, spread25, spread27.
const std::vector<std::string>& scenario_names();
SpreadGridConfig spread_scenario(const std::string& key);

// Scenario-parameter overrides; zero means "keep the scenario default".
struct EnvOverrides {
  int grid_size = 0;
  int n_agents = 0;
  int obs_radius = 0;
  int episode_limit = 0;
};

std::unique_ptr<DecPomdpEnv> make_env(const std::string& key, const EnvOverrides& overrides = {});

}  // namespace dagmix::envs
