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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dagmix/errors.hpp"
#include "dagmix/graphgen.hpp"
#include "dagmix/mixers.hpp"
#include "dagmix/numerics/ops.hpp"
#include "oracles.hpp"

namespace dagmix::mixers {
namespace {

namespace nx = numerics;
using nx::Shape;
using oracle::random_tensor;

MixerConfig small_config(MixerKind kind, std::int64_t n) {
  MixerConfig cfg;
  cfg.kind = kind;
  cfg.n_agents = n;
  cfg.obs_dim = 3;
  cfg.state_dim = 4;
  cfg.embed_dim = 5;
  cfg.key_dim = 4;
  cfg.hypernet_hidden = 6;
  return cfg;
}

Tensor random_graph(Rng& rng, std::int64_t M, std::int64_t n, double p = 0.4) {
  Tensor a(Shape{M, n, n});
  auto d = a.mutable_data();
  for (std::int64_t m = 0; m < M; ++m)
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        d[(m * n + i) * n + j] = (i == j || uniform_real(rng, 0.0, 1.0) < p) ? 1.0 : 0.0;
  return a;
}

oracle::Mat graph_rows(const Tensor& a, std::int64_t m) {
  const auto n = a.dim(-1);
  oracle::Mat out(n, oracle::Vec(n));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i][j] = a.data()[(m * n + i) * n + j];
  return out;
}

std::vector<oracle::Vec> split(const Tensor& t, std::int64_t first, std::int64_t count) {
  const auto w = t.dim(-1);
  std::vector<oracle::Vec> out;
  for (std::int64_t r = first; r < first + count; ++r)
    out.emplace_back(t.data().begin() + r * w, t.data().begin() + (r + 1) * w);
  return out;
}

TEST(Kinds, ParseAndClassify) {
  for (MixerKind k : all_mixer_kinds()) EXPECT_EQ(parse_mixer_kind(to_string(k)), k);
  EXPECT_EQ(parse_mixer_kind("DAGMIX"), MixerKind::kDagmix);
  EXPECT_THROW(parse_mixer_kind("coma"), ConfigError);
  EXPECT_TRUE(uses_dynamic_graph(MixerKind::kDagvdn));
  EXPECT_FALSE(uses_dynamic_graph(MixerKind::kFcgmix));
  EXPECT_TRUE(uses_attention(MixerKind::kFcgmix));
  EXPECT_FALSE(uses_hypernet(MixerKind::kDagvdn));
  EXPECT_TRUE(uses_hypernet(MixerKind::kQmix));
}

TEST(Attention, IdentityGraphReturnsInputs) {
  Rng rng(1);
  const auto p = make_attention(5, 4, rng);
  const std::int64_t n = 4;
  Tensor eye(Shape{n, n});
  for (std::int64_t i = 0; i < n; ++i) eye.mutable_data()[i * n + i] = 1.0;
  Tensor q = random_tensor({n}, rng, 1.0, false);
  const auto out = masked_attention_mix(p, random_tensor({n, 5}, rng, 1.0, false), eye, q);
  EXPECT_EQ(oracle::values(out.mixed), oracle::values(q));
}

TEST(Attention, ZeroProjectionsAverageTheNeighbourhood) {
  Rng rng(2);
  auto p = make_attention(5, 4, rng);
  for (double& v : p.w_query.mutable_data()) v = 0.0;
  for (double& v : p.w_key.mutable_data()) v = 0.0;
  Tensor a(Shape{3, 3}, {1, 1, 0, 0, 1, 0, 0, 0, 1});
  Tensor q(Shape{3}, {1.0, 2.0, 3.0});
  const auto out = masked_attention_mix(p, random_tensor({3, 5}, rng, 1.0, false), a, q);
  EXPECT_DOUBLE_EQ(out.mixed.data()[0], 1.5);
  EXPECT_DOUBLE_EQ(out.mixed.data()[1], 2.0);
  EXPECT_DOUBLE_EQ(out.mixed.data()[2], 3.0);
}

TEST(Attention, MatchesScalarLoopOracle) {
  Rng rng(3);
  for (int draw = 0; draw < 20; ++draw) {
    const auto p = make_attention(5, 4, rng);
    const std::int64_t n = 3, M = 2;
    Tensor x = random_tensor({M, n, 5}, rng, 2.0, false);
    Tensor a = random_graph(rng, M, n);
    Tensor q = random_tensor({M, n}, rng, 3.0, false);
    const auto out = masked_attention_mix(p, x, a, q);
    for (std::int64_t m = 0; m < M; ++m) {
      const auto ref = oracle::attention(p, split(x, m * n, n), graph_rows(a, m),
                                         split(q, m, 1)[0]);
      for (std::int64_t i = 0; i < n; ++i) {
        EXPECT_NEAR(out.mixed.data()[m * n + i], ref.mixed[i], 1e-12);
        for (std::int64_t j = 0; j < n; ++j)
          EXPECT_NEAR(out.weights.data()[(m * n + i) * n + j], ref.weights[i][j], 1e-12);
      }
    }
  }
}

TEST(Attention, WeightsAreADistributionOverTheNeighbourhood) {
  Rng rng(4);
  const auto p = make_attention(5, 4, rng);
  const std::int64_t n = 7;
  Tensor a = random_graph(rng, 1, n);
  const auto out = masked_attention_mix(p, random_tensor({1, n, 5}, rng, 3.0, false), a,
                                        random_tensor({1, n}, rng, 1.0, false));
  for (std::int64_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double w = out.weights.data()[i * n + j];
      EXPECT_GE(w, 0.0);
      if (a.data()[i * n + j] == 0.0) EXPECT_EQ(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-14);
  }
}

TEST(Attention, PermutationEquivariance) {
  Rng rng(5);
  const auto p = make_attention(5, 4, rng);
  const std::int64_t n = 5;
  const std::vector<std::int64_t> perm = {3, 0, 4, 1, 2};
  Tensor x = random_tensor({n, 5}, rng, 1.0, false);
  Tensor q = random_tensor({n}, rng, 1.0, false);
  Tensor a = nx::reshape(random_graph(rng, 1, n), {n, n});
  Tensor xp(Shape{n, 5}), qp(Shape{n}), ap(Shape{n, n});
  for (std::int64_t i = 0; i < n; ++i) {
    for (int k = 0; k < 5; ++k) xp.mutable_data()[i * 5 + k] = x.data()[perm[i] * 5 + k];
    qp.mutable_data()[i] = q.data()[perm[i]];
    for (std::int64_t j = 0; j < n; ++j)
      ap.mutable_data()[i * n + j] = a.data()[perm[i] * n + perm[j]];
  }
  const auto base = masked_attention_mix(p, x, a, q);
  const auto moved = masked_attention_mix(p, xp, ap, qp);
  for (std::int64_t i = 0; i < n; ++i)
    EXPECT_NEAR(moved.mixed.data()[i], base.mixed.data()[perm[i]], 1e-14);
}

TEST(Attention, NonNeighboursHaveNoInfluence) {
  Rng rng(6);
  for (std::int64_t n : {3, 8}) {
    const auto p = make_attention(5, 4, rng);
    Tensor x = random_tensor({1, n, 5}, rng, 1.0, false);
    Tensor q = random_tensor({1, n}, rng, 1.0, false);
    Tensor a = random_graph(rng, 1, n, 0.3);
    const auto base = masked_attention_mix(p, x, a, q);
    for (std::int64_t agent = 0; agent < n; ++agent) {
      Tensor x2 = x.clone(), q2 = q.clone();
      for (std::int64_t j = 0; j < n; ++j) {
        if (a.data()[agent * n + j] != 0.0) continue;
        q2.mutable_data()[j] = 1e6 * (j + 1);
        for (int k = 0; k < 5; ++k) x2.mutable_data()[j * 5 + k] = -1e3 + k;
      }
      const auto out = masked_attention_mix(p, x2, a, q2);
      EXPECT_EQ(out.mixed.data()[agent], base.mixed.data()[agent]);
    }
  }
}

TEST(Attention, RejectsSoftOrEmptyGraphs) {
  Rng rng(7);
  const auto p = make_attention(5, 4, rng);
  Tensor x = random_tensor({2, 5}, rng, 1.0, false);
  Tensor q = random_tensor({2}, rng, 1.0, false);
  EXPECT_THROW(masked_attention_mix(p, x, Tensor(Shape{2, 2}, {1, 0.5, 0, 1}), q), ShapeError);
  EXPECT_THROW(masked_attention_mix(p, x, Tensor(Shape{2, 2}, {1, 0, 0, 0}), q),
               EmptyNeighborhoodError);
  EXPECT_THROW(masked_attention_mix(p, x, Tensor(Shape{3, 3}), q), ShapeError);
}

TEST(Combine, VdnSums) {
  EXPECT_DOUBLE_EQ(vdn_combine(Tensor(Shape{3}, {1.0, 2.0, 3.0})).item(), 6.0);
  EXPECT_DOUBLE_EQ(vdn_combine(Tensor(Shape{4})).item(), 0.0);
  Rng rng(8);
  Tensor q = random_tensor({2, 6}, rng, 1.0, false);
  const Tensor s = vdn_combine(q);
  for (int m = 0; m < 2; ++m) {
    double acc = 0.0;
    for (int a = 0; a < 6; ++a) acc += q.data()[m * 6 + a];
    EXPECT_NEAR(s.data()[m], acc, 1e-15);
  }
}

TEST(Combine, HypernetAffineMatchesOracle) {
  Rng rng(9);
  Mixer mixer = make_mixer(small_config(MixerKind::kQmix, 4), rng);
  Tensor q = random_tensor({5, 4}, rng, 1.0, false), s = random_tensor({5, 4}, rng, 1.0, false);
  const Tensor total = qmix_combine(mixer.hypernet, q, s);
  for (int m = 0; m < 5; ++m) {
    const auto hv = oracle::hypernet(mixer.hypernet, split(s, m, 1)[0]);
    double ref = hv.bias;
    for (int a = 0; a < 4; ++a) ref += hv.weights[a] * q.data()[m * 4 + a];
    EXPECT_NEAR(total.data()[m], ref, 1e-12);
  }
  EXPECT_THROW(qmix_combine(mixer.hypernet, Tensor(Shape{5, 3}), s), ShapeError);
}

TEST(Combine, ZeroHypernetGivesZero) {
  Rng rng(10);
  Mixer mixer = make_mixer(small_config(MixerKind::kQmix, 3), rng);
  nx::ParamList params;
  networks::collect_params(mixer.hypernet, "h", params);
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (double& v : t.mutable_data()) v = 0.0;
  }
  const Tensor total = qmix_combine(mixer.hypernet, random_tensor({2, 3}, rng, 5.0, false),
                                    random_tensor({2, 4}, rng, 1.0, false));
  for (double v : total.data()) EXPECT_EQ(v, 0.0);
}

MixInputs random_inputs(const Mixer& mixer, Rng& rng, std::int64_t M, std::int64_t n) {
  MixInputs in;
  in.q_values = random_tensor({M, n}, rng, 2.0, false);
  in.embeddings = encode_observations(mixer, random_tensor({M, n, 3}, rng, 1.0, false));
  in.adjacency = random_graph(rng, M, n);
  in.state = random_tensor({M, 4}, rng, 1.0, false);
  return in;
}

TEST(Mix, VdnOfTwo) {
  Rng rng(11);
  Mixer mixer = make_mixer(small_config(MixerKind::kVdn, 2), rng);
  MixInputs in;
  in.q_values = Tensor(Shape{1, 2}, {1.0, 2.0});
  EXPECT_DOUBLE_EQ(mix(mixer, in).q_total.item(), 3.0);
  EXPECT_FALSE(mix(mixer, in).attention_weights.defined());
}

TEST(Mix, FullyConnectedEqualsDagmixOnAllOnes) {
  Rng rng(12);
  for (std::int64_t n : {2, 5, 9}) {
    Mixer mixer = make_mixer(small_config(MixerKind::kDagmix, n), rng);
    MixInputs in = random_inputs(mixer, rng, 3, n);
    in.adjacency = graphgen::full_adjacency(3, n);
    const auto dag = mix(MixerKind::kDagmix, mixer, in);
    in.adjacency = Tensor();
    const auto fc = mix(MixerKind::kFcgmix, mixer, in);
    EXPECT_EQ(oracle::values(dag.q_total), oracle::values(fc.q_total));
  }
}

TEST(Mix, DagvdnSumsMixedValues) {
  Rng rng(13);
  Mixer mixer = make_mixer(small_config(MixerKind::kDagvdn, 4), rng);
  MixInputs in = random_inputs(mixer, rng, 2, 4);
  const auto out = mix(mixer, in);
  const auto att = masked_attention_mix(mixer.attention, in.embeddings, in.adjacency, in.q_values);
  for (int m = 0; m < 2; ++m) {
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) acc += att.mixed.data()[m * 4 + a];
    EXPECT_NEAR(out.q_total.data()[m], acc, 1e-14);
  }
  MixInputs missing = in;
  missing.adjacency = Tensor();
  EXPECT_THROW(mix(mixer, missing), ShapeError);
}

TEST(Mix, DagmixEndToEndMatchesOracle) {
  Rng rng(14);
  graphgen::GraphGenConfig gcfg;
  gcfg.obs_dim = 3;
  gcfg.embed_dim = 4;
  gcfg.hidden = 3;
  for (int draw = 0; draw < 10; ++draw) {
    graphgen::GraphGenerator gen = graphgen::make_graph_generator(gcfg, rng);
    Mixer mixer = make_mixer(small_config(MixerKind::kDagmix, 3), rng);
    Tensor obs = random_tensor({3, 3}, rng, 1.0, false);
    Tensor q = random_tensor({1, 3}, rng, 2.0, false);
    Tensor state = random_tensor({1, 4}, rng, 1.0, false);
    const std::uint64_t key = 500 + draw;
    MixInputs in;
    in.q_values = q;
    in.embeddings = nx::reshape(encode_observations(mixer, obs), {1, 3, 5});
    in.adjacency = nx::reshape(graphgen::generate(gen, obs, std::span(&key, 1)).adjacency, {1, 3, 3});
    in.state = state;
    const double got = mix(mixer, in).q_total.item();
    const auto ref = oracle::dagmix_forward(gen, mixer, split(obs, 0, 3), split(state, 0, 1)[0],
                                            split(q, 0, 1)[0], key);
    EXPECT_NEAR(got, ref.q_total, 1e-10);
  }
}

TEST(Monotonicity, ProbeIsNonnegativeForEveryMonotonicKind) {
  Rng rng(15);
  for (MixerKind kind : {MixerKind::kQmix, MixerKind::kDagmix, MixerKind::kDagvdn, MixerKind::kFcgmix}) {
    for (int draw = 0; draw < 20; ++draw) {
      Mixer mixer = make_mixer(small_config(kind, 5), rng);
      const MixInputs in = random_inputs(mixer, rng, 2, 5);
      for (double d : monotonicity_probe(kind, mixer, in, 1e-3)) EXPECT_GE(d, -1e-8);
    }
  }
}

TEST(Monotonicity, VdnProbeIsExactlyDelta) {
  Rng rng(16);
  Mixer mixer = make_mixer(small_config(MixerKind::kVdn, 3), rng);
  MixInputs in;
  in.q_values = Tensor(Shape{1, 3}, {0.5, 0.25, -1.0});
  const double delta = std::ldexp(1.0, -10);
  for (double d : monotonicity_probe(MixerKind::kVdn, mixer, in, delta)) EXPECT_EQ(d, delta);
  EXPECT_THROW(monotonicity_probe(MixerKind::kVdn, mixer, in, 0.0), ConfigError);
}

TEST(Monotonicity, TwoStageMixingIsMonotonicToo) {
  Rng rng(17);
  MixerConfig cfg = small_config(MixerKind::kQmix, 4);
  cfg.two_stage = true;
  cfg.two_stage_embed = 3;
  for (int draw = 0; draw < 20; ++draw) {
    Mixer mixer = make_mixer(cfg, rng);
    const MixInputs in = random_inputs(mixer, rng, 2, 4);
    for (double d : monotonicity_probe(MixerKind::kQmix, mixer, in, 1e-3)) EXPECT_GE(d, -1e-8);
  }
}

TEST(Gradients, AttentionStageFiniteDifferences) {
  Rng rng(18);
  for (int draw = 0; draw < 3; ++draw) {
    auto p = make_attention(5, 4, rng);
    Tensor x = random_tensor({2, 4, 5}, rng), q = random_tensor({2, 4}, rng);
    Tensor a = random_graph(rng, 2, 4);
    const auto r = oracle::check_gradients(
        [&] { return oracle::probe(masked_attention_mix(p, x, a, q).mixed, 1); },
        {p.w_query, p.w_key, x, q});
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(Gradients, HypernetStageFiniteDifferences) {
  Rng rng(19);
  for (bool two_stage : {false, true}) {
    MixerConfig cfg = small_config(MixerKind::kQmix, 3);
    cfg.two_stage = two_stage;
    cfg.two_stage_embed = 3;
    Mixer mixer = make_mixer(cfg, rng);
    nx::ParamList params;
    collect_params(mixer, "m", params);
    Tensor q = random_tensor({2, 3}, rng), s = random_tensor({2, 4}, rng);
    auto inputs = nx::tensors_of(params);
    inputs.push_back(q);
    inputs.push_back(s);
    MixInputs in;
    in.q_values = q;
    in.state = s;
    const auto r = oracle::check_gradients(
        [&] { return oracle::probe(mix(mixer, in).q_total, 2); }, inputs);
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(Gradients, QTotalIsNondecreasingInEachQ) {
  Rng rng(20);
  Mixer mixer = make_mixer(small_config(MixerKind::kDagmix, 6), rng);
  MixInputs in = random_inputs(mixer, rng, 3, 6);
  in.q_values.set_requires_grad(true);
  {
    nx::Tape tape;
    tape.backward(nx::sum_all(mix(mixer, in).q_total));
  }
  for (double g : in.q_values.grad()) EXPECT_GE(g, -1e-12);
}

TEST(Entropy, UniformPairIsLogTwo) {
  Tensor w(Shape{1, 2, 2}, {0.5, 0.5, 1.0, 0.0});
  const auto h = attention_entropy(w);
  EXPECT_NEAR(h[0], std::log(2.0), 1e-15);
  EXPECT_EQ(h[1], 0.0);
}

}  // namespace
}  // namespace dagmix::mixers
