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

#include "dagmix/mixers.hpp"

#include <cmath>

#include "dagmix/errors.hpp"
#include "dagmix/graphgen.hpp"
#include "dagmix/numerics/ops.hpp"

namespace dagmix::mixers {

namespace nx = numerics;
using networks::Activation;

std::string to_string(MixerKind kind) {
  switch (kind) {
    case MixerKind::kVdn:
      return "vdn";
    case MixerKind::kQmix:
      return "qmix";
    case MixerKind::kDagmix:
      return "dagmix";
    case MixerKind::kDagvdn:
      return "dagvdn";
    case MixerKind::kFcgmix:
      return "fcgmix";
  }
  return "unknown";
}

const std::vector<MixerKind>& all_mixer_kinds() {
  static const std::vector<MixerKind> kinds = {MixerKind::kVdn, MixerKind::kQmix,
                                               MixerKind::kDagmix, MixerKind::kDagvdn,
                                               MixerKind::kFcgmix};
  return kinds;
}

MixerKind parse_mixer_kind(const std::string& text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (MixerKind k : all_mixer_kinds()) {
    if (to_string(k) == lower) return k;
  }
  throw ConfigError("unknown algo '" + text + "'; valid kinds: vdn, qmix, dagmix, dagvdn, fcgmix");
}

bool uses_dynamic_graph(MixerKind kind) {
  return kind == MixerKind::kDagmix || kind == MixerKind::kDagvdn;
}

bool uses_attention(MixerKind kind) {
  return uses_dynamic_graph(kind) || kind == MixerKind::kFcgmix;
}

bool uses_hypernet(MixerKind kind) {
  return kind == MixerKind::kQmix || kind == MixerKind::kDagmix || kind == MixerKind::kFcgmix;
}

AttentionParams make_attention(std::int64_t embed_dim, std::int64_t key_dim, Rng& rng) {
  if (key_dim <= 0) throw ConfigError("attention key_dim must be > 0");
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  AttentionParams p;
  p.w_query = Tensor({embed_dim, key_dim}, true);
  p.w_key = Tensor({embed_dim, key_dim}, true);
  for (double& v : p.w_query.mutable_data()) v = uniform_real(rng, -bound, bound);
  for (double& v : p.w_key.mutable_data()) v = uniform_real(rng, -bound, bound);
  return p;
}

AttentionOutput masked_attention_mix(const AttentionParams& params, const Tensor& x,
                                     const Tensor& adjacency, const Tensor& q_values) {
  const bool single = x.rank() == 2;
  const Tensor xb = single ? nx::reshape(x, {1, x.dim(0), x.dim(1)}) : x;
  const Tensor ab = adjacency.rank() == 2
                        ? nx::reshape(adjacency, {1, adjacency.dim(0), adjacency.dim(1)})
                        : adjacency;
  const Tensor qb = q_values.rank() == 1 ? nx::reshape(q_values, {1, q_values.dim(0)}) : q_values;
  if (xb.rank() != 3) throw ShapeError("masked_attention_mix: expected x [M, n, E]");
  const std::int64_t M = xb.dim(0), n = xb.dim(1), E = xb.dim(2);
  if (E != params.embed_dim()) {
    throw ShapeError("masked_attention_mix: embedding width " + std::to_string(E) +
                     " vs projection " + std::to_string(params.embed_dim()));
  }
  if (ab.shape() != nx::Shape{M, n, n} || qb.shape() != nx::Shape{M, n}) {
    throw ShapeError("masked_attention_mix: adjacency " + nx::to_string(adjacency.shape()) +
                     " / q " + nx::to_string(q_values.shape()) + " for " + std::to_string(n) +
                     " agents");
  }
  for (double v : ab.data()) {
    if (v != 0.0 && v != 1.0) throw ShapeError("masked_attention_mix: adjacency must be hard 0/1");
  }
  const std::int64_t dk = params.key_dim();
  Tensor flat = nx::reshape(xb, {M * n, E});
  Tensor query = nx::reshape(nx::matmul(flat, params.w_query), {M, n, dk});
  Tensor key = nx::reshape(nx::matmul(flat, params.w_key), {M, n, dk});
  Tensor scores = nx::scale(nx::bmm(query, nx::transpose(key, 1, 2)),
                            1.0 / std::sqrt(static_cast<double>(dk)));
  const Tensor keep = ab.detach();
  // Multiplying by the (straight-through) adjacency leaves the values
  // unchanged and routes gradient to the edges that are present.
  Tensor weights = nx::mul(nx::softmax(scores, -1, &keep), ab);
  Tensor mixed = nx::reshape(nx::bmm(weights, nx::reshape(qb, {M, n, 1})), {M, n});
  if (single) {
    return {nx::reshape(mixed, {n}), nx::reshape(weights, {n, n})};
  }
  return {mixed, weights};
}

Tensor qmix_combine(const networks::Hypernet& hypernet, const Tensor& q_prime,
                    const Tensor& state) {
  if (q_prime.rank() != 2 || q_prime.dim(1) != hypernet.n_agents()) {
    throw ShapeError("qmix_combine: q " + nx::to_string(q_prime.shape()) + " for hypernet arity " +
                     std::to_string(hypernet.n_agents()));
  }
  const auto out = networks::hypernet_forward(hypernet, state);
  return nx::add(nx::sum(nx::mul(q_prime, out.weights), 1),
                 nx::reshape(out.bias, {out.bias.dim(0)}));
}

Tensor qmix_combine_two_stage(const TwoStageMixing& mixing, const Tensor& q_prime,
                              const Tensor& state) {
  const std::int64_t M = q_prime.dim(0), n = q_prime.dim(1), e = mixing.embed;
  if (mixing.hyper_w1.out_features() != n * e) {
    throw ShapeError("qmix_combine_two_stage: arity mismatch");
  }
  Tensor w1 = nx::reshape(nx::abs(networks::mlp_forward(mixing.hyper_w1, state)), {M, n, e});
  Tensor b1 = nx::reshape(networks::linear_forward(mixing.hyper_b1, state), {M, 1, e});
  Tensor hidden = nx::elu(nx::add(nx::bmm(nx::reshape(q_prime, {M, 1, n}), w1), b1));
  Tensor w2 = nx::reshape(nx::abs(networks::mlp_forward(mixing.hyper_w2, state)), {M, e, 1});
  Tensor v = nx::reshape(networks::mlp_forward(mixing.value, state), {M});
  return nx::add(nx::reshape(nx::bmm(hidden, w2), {M}), v);
}

Tensor vdn_combine(const Tensor& q_values) {
  if (q_values.rank() == 1) return nx::sum(q_values, 0);
  return nx::sum(q_values, -1);
}

Mixer make_mixer(const MixerConfig& config, Rng& rng) {
  if (config.n_agents < 1) throw ConfigError("mixer needs at least one agent");
  Mixer m;
  m.kind = config.kind;
  m.encoder = networks::make_mlp({{config.obs_dim, config.embed_dim}, {Activation::kRelu}}, rng);
  m.attention = make_attention(config.embed_dim, config.key_dim, rng);
  m.hypernet = networks::make_hypernet(config.state_dim, config.n_agents, config.hypernet_hidden, rng);
  m.two_stage = config.two_stage;
  if (config.two_stage) {
    const auto e = config.two_stage_embed;
    m.classic.embed = e;
    m.classic.hyper_w1 = networks::make_mlp(
        {{config.state_dim, config.hypernet_hidden, config.n_agents * e},
         {Activation::kRelu, Activation::kNone}},
        rng);
    m.classic.hyper_b1 = networks::make_linear(config.state_dim, e, rng);
    m.classic.hyper_w2 = networks::make_mlp(
        {{config.state_dim, config.hypernet_hidden, e}, {Activation::kRelu, Activation::kNone}},
        rng);
    m.classic.value = networks::make_mlp(
        {{config.state_dim, e, 1}, {Activation::kRelu, Activation::kNone}}, rng);
  }
  return m;
}

void collect_params(const Mixer& mixer, const std::string& prefix, numerics::ParamList& out) {
  networks::collect_params(mixer.encoder, prefix + ".encoder", out);
  out.push_back({prefix + ".attention.w_query", mixer.attention.w_query});
  out.push_back({prefix + ".attention.w_key", mixer.attention.w_key});
  networks::collect_params(mixer.hypernet, prefix + ".hypernet", out);
  if (mixer.two_stage) {
    networks::collect_params(mixer.classic.hyper_w1, prefix + ".classic.hyper_w1", out);
    networks::collect_params(mixer.classic.hyper_b1, prefix + ".classic.hyper_b1", out);
    networks::collect_params(mixer.classic.hyper_w2, prefix + ".classic.hyper_w2", out);
    networks::collect_params(mixer.classic.value, prefix + ".classic.value", out);
  }
}

Tensor encode_observations(const Mixer& mixer, const Tensor& obs) {
  return networks::mlp_forward(mixer.encoder, obs);
}

namespace {

Tensor combine_monotonic(const Mixer& mixer, const Tensor& q, const Tensor& state) {
  return mixer.two_stage ? qmix_combine_two_stage(mixer.classic, q, state)
                         : qmix_combine(mixer.hypernet, q, state);
}

}  // namespace

MixOutput mix(MixerKind kind, const Mixer& mixer, const MixInputs& inputs) {
  const Tensor& q = inputs.q_values;
  if (q.rank() != 2) throw ShapeError("mix: q_values must be [M, n]");
  switch (kind) {
    case MixerKind::kVdn:
      return {vdn_combine(q), Tensor()};
    case MixerKind::kQmix:
      return {combine_monotonic(mixer, q, inputs.state), Tensor()};
    default:
      break;
  }
  const Tensor adjacency = kind == MixerKind::kFcgmix ? graphgen::full_adjacency(q.dim(0), q.dim(1))
                                                      : inputs.adjacency;
  if (!adjacency.defined()) throw ShapeError("mix: " + to_string(kind) + " needs an adjacency");
  auto att = masked_attention_mix(mixer.attention, inputs.embeddings, adjacency, q);
  Tensor total = kind == MixerKind::kDagvdn ? vdn_combine(att.mixed)
                                            : combine_monotonic(mixer, att.mixed, inputs.state);
  return {total, att.weights};
}

std::vector<double> monotonicity_probe(MixerKind kind, const Mixer& mixer,
                                       const MixInputs& inputs, double delta) {
  if (!(delta > 0.0)) throw ConfigError("monotonicity_probe: delta must be > 0");
  nx::NoGradGuard no_grad;
  const std::int64_t M = inputs.q_values.dim(0), n = inputs.q_values.dim(1);
  const Tensor base = mix(kind, mixer, inputs).q_total;
  std::vector<double> out(static_cast<std::size_t>(M * n));
  for (std::int64_t a = 0; a < n; ++a) {
    MixInputs bumped = inputs;
    bumped.q_values = inputs.q_values.clone();
    auto q = bumped.q_values.mutable_data();
    for (std::int64_t m = 0; m < M; ++m) q[static_cast<std::size_t>(m * n + a)] += delta;
    const Tensor shifted = mix(kind, mixer, bumped).q_total;
    for (std::int64_t m = 0; m < M; ++m) {
      out[static_cast<std::size_t>(m * n + a)] =
          shifted.data()[static_cast<std::size_t>(m)] - base.data()[static_cast<std::size_t>(m)];
    }
  }
  return out;
}

std::vector<double> attention_entropy(const Tensor& weights) {
  if (weights.rank() != 3) throw ShapeError("attention_entropy: expected [M, n, n]");
  const std::int64_t M = weights.dim(0), n = weights.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  if (M == 0) return out;
  auto w = weights.data();
  for (std::int64_t m = 0; m < M; ++m) {
    for (std::int64_t a = 0; a < n; ++a) {
      double h = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double p = w[static_cast<std::size_t>((m * n + a) * n + i)];
        if (p > 0.0) h -= p * std::log(p);
      }
      out[static_cast<std::size_t>(a)] += h;
    }
  }
  for (double& v : out) v /= static_cast<double>(M);
  return out;
}

}  // namespace dagmix::mixers
