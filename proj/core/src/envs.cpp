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

#include "dagmix/envs.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <tuple>

#include "dagmix/errors.hpp"

namespace dagmix::envs {

namespace {

// Power-of-two scales keep observations exactly representable in float.
constexpr double kPositionScale = 1.0 / 16.0;
constexpr double kOffsetScale = 1.0 / 4.0;

void check_actions(std::span<const int> actions, int n, int n_actions) {
  if (static_cast<int>(actions.size()) != n) {
    throw EnvError("step: expected " + std::to_string(n) + " actions, got " +
                   std::to_string(actions.size()));
  }
  for (int a = 0; a < n; ++a) {
    if (actions[static_cast<std::size_t>(a)] < 0 ||
        actions[static_cast<std::size_t>(a)] >= n_actions) {
      throw EnvError("step: action " + std::to_string(actions[static_cast<std::size_t>(a)]) +
                     " of agent " + std::to_string(a) + " is unavailable");
    }
  }
}

}  // namespace

MatrixGame::MatrixGame(std::vector<std::vector<double>> payoff) : payoff_(std::move(payoff)) {
  if (payoff_.empty()) throw ConfigError("matrix game needs a non-empty payoff");
  for (const auto& row : payoff_) {
    if (row.size() != payoff_.size()) throw ConfigError("matrix game payoff must be square");
  }
}

std::vector<std::vector<double>> MatrixGame::default_payoff() {
  return {{12.0, 0.0, 0.0}, {0.0, 6.0, 0.0}, {0.0, 0.0, 3.0}};
}

EnvStep MatrixGame::observe() const {
  EnvStep s;
  s.state = {1.0};
  s.obs = {1.0, 1.0};
  s.avail.assign(2 * payoff_.size(), 1);
  return s;
}

EnvStep MatrixGame::reset(Rng&) {
  done_ = false;
  return observe();
}

EnvStep MatrixGame::step(std::span<const int> actions) {
  if (done_) throw EnvError("step: episode already terminated");
  check_actions(actions, 2, n_actions());
  EnvStep s = observe();
  s.reward = payoff_[static_cast<std::size_t>(actions[0])][static_cast<std::size_t>(actions[1])];
  s.terminated = true;
  done_ = true;
  return s;
}

MatrixOptimum oracle_optimal(const MatrixGame& game) {
  const auto& p = game.payoff();
  MatrixOptimum best{p[0][0], {0, 0}};
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[i][j] > best.value) best = {p[i][j], {static_cast<int>(i), static_cast<int>(j)}};
    }
  }
  return best;
}

SpreadGrid::SpreadGrid(SpreadGridConfig config) : config_(config) {
  if (config_.grid_size < 1 || config_.n_agents < 1 || config_.obs_radius < 0 ||
      config_.episode_limit < 1 || config_.max_visible < 1) {
    throw ConfigError("spread grid: sizes must be positive");
  }
  if (2 * config_.n_agents > config_.grid_size * config_.grid_size) {
    throw ConfigError("spread grid: " + std::to_string(config_.n_agents) +
                      " agents and landmarks do not fit on a " +
                      std::to_string(config_.grid_size) + "x" + std::to_string(config_.grid_size) +
                      " grid");
  }
}

int SpreadGrid::obs_dim() const {
  const int agent_slots = std::min(config_.n_agents - 1, config_.max_visible);
  const int landmark_slots = std::min(config_.n_agents, config_.max_visible);
  return 2 + 3 * agent_slots + 3 * landmark_slots;
}

EnvStep SpreadGrid::reset(Rng& rng) {
  const int g = config_.grid_size;
  const int n = config_.n_agents;
  // Partial Fisher-Yates over the cells: 2n distinct cells.
  std::vector<int> cells(static_cast<std::size_t>(g * g));
  for (int k = 0; k < g * g; ++k) cells[static_cast<std::size_t>(k)] = k;
  for (int k = 0; k < 2 * n; ++k) {
    const int pick = std::uniform_int_distribution<int>(k, g * g - 1)(rng);
    std::swap(cells[static_cast<std::size_t>(k)], cells[static_cast<std::size_t>(pick)]);
  }
  std::vector<Cell> agents, landmarks;
  for (int k = 0; k < n; ++k) {
    agents.push_back({cells[static_cast<std::size_t>(k)] % g, cells[static_cast<std::size_t>(k)] / g});
    landmarks.push_back(
        {cells[static_cast<std::size_t>(n + k)] % g, cells[static_cast<std::size_t>(n + k)] / g});
  }
  return set_layout(std::move(agents), std::move(landmarks));
}

EnvStep SpreadGrid::set_layout(std::vector<Cell> agents, std::vector<Cell> landmarks) {
  const int n = config_.n_agents;
  if (static_cast<int>(agents.size()) != n || static_cast<int>(landmarks.size()) != n) {
    throw EnvError("set_layout: expected " + std::to_string(n) + " agents and landmarks");
  }
  auto in_grid = [&](const Cell& c) {
    return c.x >= 0 && c.y >= 0 && c.x < config_.grid_size && c.y < config_.grid_size;
  };
  std::set<std::pair<int, int>> seen;
  for (const auto& c : agents) {
    if (!in_grid(c) || !seen.insert({c.x, c.y}).second) {
      throw EnvError("set_layout: agents must occupy distinct in-grid cells");
    }
  }
  for (const auto& c : landmarks) {
    if (!in_grid(c)) throw EnvError("set_layout: landmark outside the grid");
  }
  agents_ = std::move(agents);
  landmarks_ = std::move(landmarks);
  t_ = 0;
  done_ = false;
  return snapshot();
}

int SpreadGrid::covered_landmarks() const {
  int covered = 0;
  for (const auto& l : landmarks_) {
    if (std::find(agents_.begin(), agents_.end(), l) != agents_.end()) ++covered;
  }
  return covered;
}

std::vector<double> SpreadGrid::observe(int agent) const {
  const Cell self = agents_[static_cast<std::size_t>(agent)];
  const int r = config_.obs_radius;
  using Entry = std::tuple<int, int, int, int>;  // chebyshev, manhattan, dy, dx
  auto visible = [&](const std::vector<Cell>& cells, int skip) {
    std::vector<Entry> out;
    for (int k = 0; k < static_cast<int>(cells.size()); ++k) {
      if (k == skip) continue;
      const int dx = cells[static_cast<std::size_t>(k)].x - self.x;
      const int dy = cells[static_cast<std::size_t>(k)].y - self.y;
      const int cheb = std::max(std::abs(dx), std::abs(dy));
      if (cheb <= r) out.emplace_back(cheb, std::abs(dx) + std::abs(dy), dy, dx);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  std::vector<double> obs(static_cast<std::size_t>(obs_dim()), 0.0);
  obs[0] = self.x * kPositionScale;
  obs[1] = self.y * kPositionScale;
  std::size_t cursor = 2;
  auto write = [&](const std::vector<Entry>& entries, int slots) {
    for (int s = 0; s < slots; ++s) {
      if (s < static_cast<int>(entries.size())) {
        const auto& [cheb, manhattan, dy, dx] = entries[static_cast<std::size_t>(s)];
        obs[cursor] = dx * kOffsetScale;
        obs[cursor + 1] = dy * kOffsetScale;
        obs[cursor + 2] = 1.0;
      }
      cursor += 3;
    }
  };
  write(visible(agents_, agent), std::min(config_.n_agents - 1, config_.max_visible));
  write(visible(landmarks_, -1), std::min(config_.n_agents, config_.max_visible));
  return obs;
}

EnvStep SpreadGrid::snapshot() const {
  EnvStep s;
  const int n = config_.n_agents;
  s.state.reserve(static_cast<std::size_t>(state_dim()));
  for (const auto& c : agents_) {
    s.state.push_back(c.x * kPositionScale);
    s.state.push_back(c.y * kPositionScale);
  }
  for (const auto& c : landmarks_) {
    s.state.push_back(c.x * kPositionScale);
    s.state.push_back(c.y * kPositionScale);
  }
  s.obs.reserve(static_cast<std::size_t>(n * obs_dim()));
  for (int a = 0; a < n; ++a) {
    auto o = observe(a);
    s.obs.insert(s.obs.end(), o.begin(), o.end());
  }
  s.avail.assign(static_cast<std::size_t>(n * n_actions()), 1);
  return s;
}

EnvStep SpreadGrid::step(std::span<const int> actions) {
  if (done_) throw EnvError("step: episode already terminated");
  const int n = config_.n_agents;
  check_actions(actions, n, n_actions());
  static constexpr int kDx[5] = {0, 0, 0, -1, 1};
  static constexpr int kDy[5] = {0, -1, 1, 0, 0};
  std::vector<Cell> target(agents_);
  for (int a = 0; a < n; ++a) {
    const int u = actions[static_cast<std::size_t>(a)];
    Cell c{agents_[static_cast<std::size_t>(a)].x + kDx[u], agents_[static_cast<std::size_t>(a)].y + kDy[u]};
    if (c.x >= 0 && c.y >= 0 && c.x < config_.grid_size && c.y < config_.grid_size) {
      target[static_cast<std::size_t>(a)] = c;
    }
  }
  // Agents that contest a cell (or swap places) bounce back to where they
  // were; bouncing can create new contests, so iterate to a fixed point.
  std::set<std::pair<int, int>> colliding_pairs;
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<bool> bounce(static_cast<std::size_t>(n), false);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        const auto& ta = target[static_cast<std::size_t>(a)];
        const auto& tb = target[static_cast<std::size_t>(b)];
        const bool same_cell = ta == tb;
        const bool swap = ta == agents_[static_cast<std::size_t>(b)] &&
                          tb == agents_[static_cast<std::size_t>(a)] && !(ta == tb);
        if (same_cell || swap) {
          colliding_pairs.insert({a, b});
          bounce[static_cast<std::size_t>(a)] = true;
          bounce[static_cast<std::size_t>(b)] = true;
        }
      }
    }
    for (int a = 0; a < n; ++a) {
      if (bounce[static_cast<std::size_t>(a)] &&
          !(target[static_cast<std::size_t>(a)] == agents_[static_cast<std::size_t>(a)])) {
        target[static_cast<std::size_t>(a)] = agents_[static_cast<std::size_t>(a)];
        changed = true;
      }
    }
  }
  agents_ = std::move(target);
  ++t_;
  const int covered = covered_landmarks();
  EnvStep s = snapshot();
  s.reward = static_cast<double>(covered) / n - config_.time_penalty -
             config_.collision_penalty * static_cast<double>(colliding_pairs.size());
  s.success = covered == n;
  s.terminated = s.success || t_ >= config_.episode_limit;
  done_ = s.terminated;
  return s;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"matrix", "spread5", "spread8", "spread25",
                                                 "spread27"};
  return names;
}

SpreadGridConfig spread_scenario(const std::string& key) {
  SpreadGridConfig c;
  if (key == "spread5") {
    c.n_agents = 5, c.grid_size = 7, c.obs_radius = 2, c.episode_limit = 20;
  } else if (key == "spread8") {
    c.n_agents = 8, c.grid_size = 9, c.obs_radius = 2, c.episode_limit = 25;
  } else if (key == "spread25") {
    c.n_agents = 25, c.grid_size = 16, c.obs_radius = 3, c.episode_limit = 30;
  } else if (key == "spread27") {
    c.n_agents = 27, c.grid_size = 16, c.obs_radius = 3, c.episode_limit = 30;
  } else {
    throw ConfigError("unknown env '" + key +
                      "'; valid envs: matrix, spread5, spread8, spread25, spread27");
  }
  return c;
}

std::unique_ptr<DecPomdpEnv> make_env(const std::string& key, const EnvOverrides& overrides) {
  if (key == "matrix") return std::make_unique<MatrixGame>(MatrixGame::default_payoff());
  SpreadGridConfig c = spread_scenario(key);
  if (overrides.grid_size > 0) c.grid_size = overrides.grid_size;
  if (overrides.n_agents > 0) c.n_agents = overrides.n_agents;
  if (overrides.obs_radius > 0) c.obs_radius = overrides.obs_radius;
  if (overrides.episode_limit > 0) c.episode_limit = overrides.episode_limit;
  return std::make_unique<SpreadGrid>(c);
}

}  // namespace dagmix::envs
