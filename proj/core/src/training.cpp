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

#include "dagmix/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "dagmix/errors.hpp"
#include "dagmix/numerics/ops.hpp"
#include "dagmix/numerics/params.hpp"

namespace dagmix::training {

namespace nx = numerics;

namespace {

std::size_t idx(std::int64_t v) { return static_cast<std::size_t>(v); }

}  // namespace

ModelConfig model_config_for(const RunConfig& config, const envs::DecPomdpEnv& env) {
  ModelConfig mc;
  mc.kind = config.algo;
  mc.n_agents = env.n_agents();
  mc.obs_dim = env.obs_dim();
  mc.state_dim = env.state_dim();
  mc.n_actions = env.n_actions();
  mc.agent_hidden = config.agent_hidden;
  mc.graph.obs_dim = mc.obs_dim;
  mc.graph.embed_dim = config.graph_embed_dim;
  mc.graph.hidden = config.graph_hidden;
  mc.graph.tau = config.gumbel_tau;
  mc.graph.lambda = config.gumbel_lambda;
  mc.graph.noise_mode = config.noise_mode;
  mc.mixer.kind = config.algo;
  mc.mixer.n_agents = mc.n_agents;
  mc.mixer.obs_dim = mc.obs_dim;
  mc.mixer.state_dim = mc.state_dim;
  mc.mixer.embed_dim = config.mixer_embed_dim;
  mc.mixer.key_dim = config.attention_dim;
  mc.mixer.hypernet_hidden = config.hypernet_hidden;
  mc.mixer.two_stage = config.mixing_layers == 2;
  mc.mixer.two_stage_embed = config.two_stage_embed;
  return mc;
}

numerics::ParamList Model::params() const {
  nx::ParamList out;
  agents::collect_params(agent, "agent", out);
  graphgen::collect_params(graph, "graph", out);
  mixers::collect_params(mixer, "mixer", out);
  return out;
}

Model make_model(const ModelConfig& config, Rng& rng) {
  agents::AgentNetConfig ac{config.n_agents, config.obs_dim, config.n_actions,
                            config.agent_hidden};
  Model m{config, agents::make_agent_net(ac, rng), graphgen::make_graph_generator(config.graph, rng),
          mixers::make_mixer(config.mixer, rng)};
  return m;
}

Model clone_model(const Model& model) {
  // Structure from a throwaway generator, values copied over.
  Rng scratch(0);
  Model copy = make_model(model.config, scratch);
  nx::copy_values(copy.params(), model.params());
  return copy;
}

ReplayBuffer::ReplayBuffer(std::int64_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::insert(Episode episode) {
  if (size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
  ++insertions_;
}

std::vector<std::int64_t> ReplayBuffer::sample_indices(std::int64_t n, Rng& rng) const {
  if (n < 0 || n > size()) {
    throw Error("replay buffer: cannot sample " + std::to_string(n) + " of " +
                std::to_string(size()) + " episodes");
  }
  std::vector<std::int64_t> pool(idx(size()));
  std::iota(pool.begin(), pool.end(), 0);
  for (std::int64_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::int64_t> pick(k, size() - 1);
    std::swap(pool[idx(k)], pool[idx(pick(rng))]);
  }
  pool.resize(idx(n));
  return pool;
}

std::vector<const Episode*> ReplayBuffer::sample(std::int64_t n, Rng& rng) const {
  std::vector<const Episode*> out;
  for (std::int64_t i : sample_indices(n, rng)) out.push_back(&episodes_[idx(i)]);
  return out;
}

const Episode& ReplayBuffer::at(std::int64_t index) const {
  if (index < 0 || index >= size()) throw Error("replay buffer: index out of range");
  return episodes_[idx(index)];
}

EpisodeBatch make_batch(std::span<const Episode* const> episodes, std::int64_t pad_to) {
  if (episodes.empty()) throw ShapeError("make_batch: no episodes");
  const Episode& first = *episodes.front();
  EpisodeBatch b;
  b.batch = static_cast<std::int64_t>(episodes.size());
  b.n_agents = first.n_agents;
  b.obs_dim = first.obs_dim;
  b.state_dim = first.state_dim;
  b.n_actions = first.n_actions;
  std::int64_t longest = 0;
  for (const Episode* e : episodes) {
    if (e->n_agents != b.n_agents || e->obs_dim != b.obs_dim || e->state_dim != b.state_dim ||
        e->n_actions != b.n_actions) {
      throw ShapeError("make_batch: episodes from different environments");
    }
    longest = std::max(longest, e->length);
  }
  if (pad_to != 0 && pad_to < longest) throw ShapeError("make_batch: pad_to shorter than episode");
  const std::int64_t T = pad_to == 0 ? longest : pad_to;
  b.max_len = T;
  const std::int64_t n = b.n_agents, O = b.obs_dim, S = b.state_dim, A = b.n_actions;
  b.states.assign(idx(b.batch * (T + 1) * S), 0.0);
  b.obs.assign(idx(b.batch * (T + 1) * n * O), 0.0);
  b.avail.assign(idx(b.batch * (T + 1) * n * A), 1);
  b.actions.assign(idx(b.batch * T * n), 0);
  b.rewards.assign(idx(b.batch * T), 0.0);
  b.terminated.assign(idx(b.batch * T), 0.0);
  b.filled.assign(idx(b.batch * T), 0.0);
  for (std::int64_t e = 0; e < b.batch; ++e) {
    const Episode& ep = *episodes[idx(e)];
    const std::int64_t L = ep.length;
    std::copy(ep.states.begin(), ep.states.end(), b.states.begin() + e * (T + 1) * S);
    std::copy(ep.obs.begin(), ep.obs.end(), b.obs.begin() + e * (T + 1) * n * O);
    std::copy(ep.avail.begin(), ep.avail.end(), b.avail.begin() + e * (T + 1) * n * A);
    std::copy(ep.actions.begin(), ep.actions.end(), b.actions.begin() + e * T * n);
    for (std::int64_t t = 0; t < L; ++t) {
      b.rewards[idx(e * T + t)] = ep.rewards[idx(t)];
      b.terminated[idx(e * T + t)] = ep.terminated[idx(t)] ? 1.0 : 0.0;
      b.filled[idx(e * T + t)] = 1.0;
    }
  }
  return b;
}

Episode run_episode(envs::DecPomdpEnv& env, const Model& model, double epsilon, Rng& rng) {
  nx::NoGradGuard no_grad;
  const std::int64_t n = env.n_agents(), A = env.n_actions();
  Episode ep;
  ep.n_agents = n;
  ep.obs_dim = env.obs_dim();
  ep.state_dim = env.state_dim();
  ep.n_actions = A;
  auto store = [&ep](const envs::EnvStep& s) {
    ep.states.insert(ep.states.end(), s.state.begin(), s.state.end());
    ep.obs.insert(ep.obs.end(), s.obs.begin(), s.obs.end());
    ep.avail.insert(ep.avail.end(), s.avail.begin(), s.avail.end());
  };
  envs::EnvStep step = env.reset(rng);
  store(step);
  Tensor hidden = agents::initial_hidden(model.agent, n);
  std::vector<int> last(idx(n), -1);
  bool done = false;
  while (!done) {
    Tensor inputs = agents::build_inputs(model.agent, step.obs, last, 1);
    auto out = agents::agent_q(model.agent, inputs, hidden);
    hidden = out.hidden;
    std::vector<int> actions = agents::select_actions(out.q.data(), step.avail, A, epsilon, rng);
    step = env.step(actions);
    ep.actions.insert(ep.actions.end(), actions.begin(), actions.end());
    ep.rewards.push_back(step.reward);
    ep.terminated.push_back(step.terminated ? 1 : 0);
    ep.episode_return += step.reward;
    ++ep.length;
    store(step);
    last = actions;
    done = step.terminated || ep.length >= env.episode_limit();
    if (done) ep.success = step.success;
  }
  return ep;
}

EpisodeStats collect_episode(envs::DecPomdpEnv& env, const Model& model, double epsilon,
                             Rng& rng, ReplayBuffer& buffer) {
  Episode ep = run_episode(env, model, epsilon, rng);
  EpisodeStats stats{ep.episode_return, ep.length, ep.success};
  buffer.insert(std::move(ep));
  return stats;
}

std::vector<std::uint64_t> graph_noise_keys(std::uint64_t base, std::int64_t batch,
                                            std::int64_t steps) {
  std::vector<std::uint64_t> keys;
  keys.reserve(idx(batch * steps));
  const std::uint64_t root = splitmix64(base);
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t t = 0; t < steps; ++t)
      keys.push_back(root ^ splitmix64((static_cast<std::uint64_t>(b) << 32) |
                                       static_cast<std::uint64_t>(t)));
  return keys;
}

namespace {

// Q-values for t = 0 .. steps-1, each [B * n, A] with rows (episode, agent).
std::vector<Tensor> unroll_agent(const agents::AgentNet& net, const EpisodeBatch& b,
                                 std::int64_t steps) {
  const std::int64_t n = b.n_agents, O = b.obs_dim, T = b.max_len;
  Tensor hidden = agents::initial_hidden(net, b.batch * n);
  std::vector<Tensor> out;
  out.reserve(idx(steps));
  std::vector<double> obs(idx(b.batch * n * O));
  std::vector<int> last(idx(b.batch * n));
  for (std::int64_t t = 0; t < steps; ++t) {
    for (std::int64_t e = 0; e < b.batch; ++e) {
      std::copy_n(b.obs.begin() + ((e * (T + 1) + t) * n) * O, n * O,
                  obs.begin() + e * n * O);
      for (std::int64_t a = 0; a < n; ++a) {
        last[idx(e * n + a)] = t == 0 ? -1 : b.actions[idx((e * T + t - 1) * n + a)];
      }
    }
    auto r = agents::agent_q(net, agents::build_inputs(net, obs, last, b.batch), hidden);
    hidden = r.hidden;
    out.push_back(r.q);
  }
  return out;
}

// Rows e * (T + 1) + t + offset of a [B, T + 1, ...] array for each flat
// filled row e * T + t.
Tensor gather_rows(const std::vector<double>& src, std::span<const std::int64_t> rows,
                   std::int64_t T, std::int64_t offset, nx::Shape row_shape) {
  const std::int64_t width = nx::numel(row_shape);
  nx::Shape shape{static_cast<std::int64_t>(rows.size())};
  shape.insert(shape.end(), row_shape.begin(), row_shape.end());
  Tensor out(shape);
  auto d = out.mutable_data();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::int64_t e = rows[k] / T, t = rows[k] % T;
    std::copy_n(src.begin() + (e * (T + 1) + t + offset) * width, width,
                d.begin() + static_cast<std::int64_t>(k) * width);
  }
  return out;
}

std::vector<std::uint64_t> row_keys(std::uint64_t base, const EpisodeBatch& b,
                                    std::span<const std::int64_t> rows) {
  const auto all = graph_noise_keys(base, b.batch, b.max_len);
  std::vector<std::uint64_t> keys;
  keys.reserve(rows.size());
  for (auto r : rows) keys.push_back(all[idx(r)]);
  return keys;
}

MixerPass mix_rows(const Model& model, const Tensor& q_rows, const Tensor& obs_rows,
                   const Tensor& state_rows, std::span<const std::uint64_t> keys) {
  const mixers::MixerKind kind = model.mixer.kind;
  mixers::MixInputs in;
  in.q_values = q_rows;
  in.state = state_rows;
  MixerPass pass;
  if (mixers::uses_attention(kind)) in.embeddings = mixers::encode_observations(model.mixer, obs_rows);
  if (mixers::uses_dynamic_graph(kind)) {
    in.adjacency = graphgen::generate(model.graph, obs_rows, keys).adjacency;
    pass.adjacency = in.adjacency;
  } else if (kind == mixers::MixerKind::kFcgmix) {
    pass.adjacency = graphgen::full_adjacency(q_rows.dim(0), q_rows.dim(1));
  }
  auto out = mixers::mix(kind, model.mixer, in);
  pass.q_total = out.q_total;
  pass.attention_weights = out.attention_weights;
  return pass;
}

}  // namespace

std::vector<std::int64_t> filled_rows(const EpisodeBatch& b) {
  std::vector<std::int64_t> rows;
  for (std::size_t r = 0; r < b.filled.size(); ++r)
    if (b.filled[r] != 0.0) rows.push_back(static_cast<std::int64_t>(r));
  return rows;
}

MixerPass online_q_total(const Model& model, const EpisodeBatch& b, std::uint64_t noise_key) {
  const std::int64_t n = b.n_agents, T = b.max_len, B = b.batch;
  const auto rows = filled_rows(b);
  std::vector<Tensor> qs = unroll_agent(model.agent, b, T);
  std::vector<Tensor> chosen;
  chosen.reserve(idx(T));
  std::vector<std::int64_t> act(idx(B * n));
  for (std::int64_t t = 0; t < T; ++t) {
    for (std::int64_t e = 0; e < B; ++e)
      for (std::int64_t a = 0; a < n; ++a)
        act[idx(e * n + a)] = b.actions[idx((e * T + t) * n + a)];
    chosen.push_back(nx::reshape(nx::gather_last(qs[idx(t)], act), {B, 1, n}));
  }
  Tensor q_rows = nx::take_rows(nx::reshape(nx::concat(chosen, 1), {B * T, n}), rows);
  Tensor obs_rows = gather_rows(b.obs, rows, T, 0, {n, b.obs_dim});
  Tensor state_rows = gather_rows(b.states, rows, T, 0, {b.state_dim});
  return mix_rows(model, q_rows, obs_rows, state_rows, row_keys(noise_key, b, rows));
}

Tensor td_targets(const EpisodeBatch& b, const Model& target, double gamma,
                  std::uint64_t noise_key) {
  nx::NoGradGuard no_grad;
  const std::int64_t n = b.n_agents, T = b.max_len, A = b.n_actions;
  const auto rows = filled_rows(b);
  const auto F = static_cast<std::int64_t>(rows.size());
  std::vector<Tensor> qs = unroll_agent(target.agent, b, T + 1);
  Tensor q_next({F, n});
  auto qn = q_next.mutable_data();
  for (std::int64_t k = 0; k < F; ++k) {
    const std::int64_t e = rows[idx(k)] / T, t = rows[idx(k)] % T;
    auto q = qs[idx(t + 1)].data();
    for (std::int64_t a = 0; a < n; ++a) {
      auto qa = q.subspan(idx((e * n + a) * A), idx(A));
      auto av = std::span<const std::uint8_t>(b.avail).subspan(
          idx(((e * (T + 1) + t + 1) * n + a) * A), idx(A));
      // Terminal next states may report nothing available; their value is masked.
      const bool any = std::any_of(av.begin(), av.end(), [](std::uint8_t v) { return v != 0; });
      const int best = any ? agents::greedy_action(qa, av) : 0;
      qn[idx(k * n + a)] = qa[idx(best)];
    }
  }
  Tensor obs_rows = gather_rows(b.obs, rows, T, 1, {n, b.obs_dim});
  Tensor state_rows = gather_rows(b.states, rows, T, 1, {b.state_dim});
  Tensor next_total =
      mix_rows(target, q_next, obs_rows, state_rows, row_keys(noise_key, b, rows)).q_total;
  Tensor y({F});
  auto yd = y.mutable_data();
  auto nt = next_total.data();
  for (std::int64_t k = 0; k < F; ++k) {
    const auto r = idx(rows[idx(k)]);
    yd[idx(k)] = b.rewards[r] + gamma * (1.0 - b.terminated[r]) * nt[idx(k)];
  }
  return y;
}

namespace {

std::uint64_t online_key(std::uint64_t key) { return splitmix64(key ^ 0x6f6e6c696e65ULL); }
std::uint64_t target_key(std::uint64_t key) { return splitmix64(key ^ 0x746172676574ULL); }

// Mean over filled rows, i.e. the filled-weighted mean over the padded batch.
Tensor td_loss(const Tensor& q_total, const Tensor& y) {
  if (q_total.size() == 0) throw Error("train_step: batch has no filled transitions");
  Tensor diff = nx::sub(q_total, y);
  return nx::mean_all(nx::mul(diff, diff));
}

}  // namespace

Learner::Learner(Model online, const RunConfig& config)
    : online_(std::move(online)),
      target_(clone_model(online_)),
      optimizer_(nx::tensors_of(online_.params()),
                 nx::RmsPropOptions{config.learning_rate, config.rms_alpha, config.rms_epsilon,
                                    config.grad_norm_clip}),
      gamma_(config.gamma) {}

TrainStepResult Learner::train_step(const EpisodeBatch& batch, std::uint64_t noise_key) {
  Tensor y = td_targets(batch, target_, gamma_, target_key(noise_key));
  TrainStepResult result;
  optimizer_.zero_grad();
  {
    nx::Tape tape;
    MixerPass pass = online_q_total(online_, batch, online_key(noise_key));
    Tensor loss = td_loss(pass.q_total, y);
    result.loss = loss.item();
    if (!std::isfinite(result.loss)) {
      throw DivergenceError("train_step: non-finite TD loss");
    }
    tape.backward(loss);

    if (pass.adjacency.defined()) result.adjacency_sparsity = graphgen::sparsity(pass.adjacency);
    if (pass.attention_weights.defined()) {
      result.attention_entropy = mixers::attention_entropy(pass.attention_weights);
    }
  }
  result.grad_norm = optimizer_.step();
  return result;
}

double Learner::evaluate_loss(const EpisodeBatch& batch, std::uint64_t noise_key) const {
  nx::NoGradGuard no_grad;
  Tensor y = td_targets(batch, target_, gamma_, target_key(noise_key));
  MixerPass pass = online_q_total(online_, batch, online_key(noise_key));
  return td_loss(pass.q_total, y).item();
}

void Learner::sync_target() { nx::copy_values(target_.params(), online_.params()); }

EvalSummary evaluate(envs::DecPomdpEnv& env, const Model& model, std::int64_t episodes, Rng& rng) {
  EvalSummary s;
  std::int64_t successes = 0;
  for (std::int64_t k = 0; k < episodes; ++k) {
    Episode ep = run_episode(env, model, 0.0, rng);
    s.returns.push_back(ep.episode_return);
    if (ep.success) ++successes;
  }
  if (episodes > 0) {
    s.mean_return = std::accumulate(s.returns.begin(), s.returns.end(), 0.0) /
                    static_cast<double>(episodes);
  }
  if (env.reports_success() && episodes > 0) {
    s.success_rate = static_cast<double>(successes) / static_cast<double>(episodes);
  }
  return s;
}

}  // namespace dagmix::training
