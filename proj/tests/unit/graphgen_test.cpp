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

#include "dagmix/errors.hpp"
#include "dagmix/graphgen.hpp"
#include "dagmix/numerics/ops.hpp"
#include "oracles.hpp"

namespace dagmix::graphgen {
namespace {

namespace nx = numerics;
using nx::Shape;
using oracle::random_tensor;

GraphGenerator small_generator(Rng& rng, NoiseMode mode = NoiseMode::kStandardGumbel,
                               double tau = 0.5) {
  GraphGenConfig cfg;
  cfg.obs_dim = 4;
  cfg.embed_dim = 5;
  cfg.hidden = 3;
  cfg.tau = tau;
  cfg.noise_mode = mode;
  return make_graph_generator(cfg, rng);
}

std::vector<oracle::Vec> split_rows(const Tensor& t, std::int64_t first, std::int64_t count) {
  const auto w = t.dim(-1);
  std::vector<oracle::Vec> out;
  for (std::int64_t r = first; r < first + count; ++r) {
    out.emplace_back(t.data().begin() + r * w, t.data().begin() + (r + 1) * w);
  }
  return out;
}

TEST(Embed, IdenticalObservationsGiveIdenticalRows) {
  Rng rng(1);
  GraphGenerator gen = small_generator(rng);
  Tensor obs(Shape{3, 4}, {0.1, 0.2, 0.3, 0.4, 0.1, 0.2, 0.3, 0.4, 0.1, 0.2, 0.3, 0.4});
  const auto rows = split_rows(embed_observations(gen, obs), 0, 3);
  EXPECT_EQ(rows[0], rows[1]);
  EXPECT_EQ(rows[1], rows[2]);
}

TEST(Embed, MatchesRowwiseMlp) {
  Rng rng(2);
  GraphGenerator gen = small_generator(rng);
  Tensor obs = random_tensor({4, 4}, rng, 1.0, false);
  const auto rows = split_rows(embed_observations(gen, obs), 0, 4);
  const auto inputs = split_rows(obs, 0, 4);
  for (int a = 0; a < 4; ++a) {
    const auto ref = oracle::mlp(gen.embed, inputs[a]);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(rows[a][k], ref[k], 1e-12);
  }
}

TEST(PairwiseLogits, MatchesBiGruOracleForEveryRow) {
  Rng rng(3);
  GraphGenerator gen = small_generator(rng);
  const std::int64_t M = 2, n = 3;
  Tensor x = random_tensor({M, n, 5}, rng, 1.0, false);
  Tensor logits = pairwise_logits(gen, x);
  ASSERT_EQ(logits.shape(), (Shape{M, n, n, 2}));
  for (std::int64_t m = 0; m < M; ++m) {
    const auto ref = oracle::pairwise_logits(gen, split_rows(x, m * n, n));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        for (int c = 0; c < 2; ++c)
          EXPECT_NEAR(logits.data()[((m * n + i) * n + j) * 2 + c], ref[i][j][c], 1e-12);
  }
}

TEST(PairwiseLogits, SingleAgentAndDeterminism) {
  Rng rng(4);
  GraphGenerator gen = small_generator(rng);
  Tensor x1 = random_tensor({1, 5}, rng, 1.0, false);
  EXPECT_EQ(pairwise_logits(gen, x1).shape(), (Shape{1, 1, 2}));
  Tensor x = random_tensor({4, 5}, rng, 1.0, false);
  EXPECT_EQ(oracle::values(pairwise_logits(gen, x)), oracle::values(pairwise_logits(gen, x)));
  EXPECT_THROW(pairwise_logits(gen, Tensor(Shape{0, 5})), ShapeError);
}

TEST(Sample, HardBinaryWithForcedDiagonalAndNormalisedPairs) {
  Rng rng(5);
  GraphGenerator gen = small_generator(rng);
  const std::int64_t n = 6;
  Tensor logits = random_tensor({n, n, 2}, rng, 3.0, false);
  const std::uint64_t key = 99;
  const auto g = sample_adjacency(gen, logits, std::span(&key, 1));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const double a = g.adjacency.data()[i * n + j];
      EXPECT_TRUE(a == 0.0 || a == 1.0);
      if (i == j) EXPECT_EQ(a, 1.0);
      const double p0 = g.probabilities.data()[(i * n + j) * 2];
      const double p1 = g.probabilities.data()[(i * n + j) * 2 + 1];
      EXPECT_GT(p0, 0.0);
      EXPECT_GT(p1, 0.0);
      EXPECT_NEAR(p0 + p1, 1.0, 1e-15);
    }
  }
  EXPECT_TRUE(to_adjacency(g.adjacency).hard);
}

TEST(Sample, MatchesOracleInBothNoiseModes) {
  for (NoiseMode mode : {NoiseMode::kStandardGumbel, NoiseMode::kLiteral}) {
    Rng rng(6);
    GraphGenerator gen = small_generator(rng, mode);
    gen.lambda = 0.7;
    const std::int64_t n = 5;
    Tensor logits = random_tensor({n, n, 2}, rng, 2.0, false);
    std::vector<std::vector<oracle::Vec>> ref_logits(n, std::vector<oracle::Vec>(n));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        ref_logits[i][j] = {logits.data()[(i * n + j) * 2], logits.data()[(i * n + j) * 2 + 1]};
    const std::uint64_t key = 12345;
    const auto g = sample_adjacency(gen, logits, std::span(&key, 1));
    const auto ref = oracle::sample(gen, ref_logits, key);
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        EXPECT_EQ(g.adjacency.data()[i * n + j], ref.adjacency[i][j]);
        EXPECT_NEAR(g.probabilities.data()[(i * n + j) * 2 + 1], ref.probs[i][j][1], 1e-12);
      }
    }
  }
}

TEST(Sample, LiteralModeWithUnitRateIsConstant) {
  Rng rng(7);
  GraphGenerator gen = small_generator(rng, NoiseMode::kLiteral);
  gen.lambda = 1.0;
  Tensor logits = random_tensor({3, 3, 2}, rng, 5.0, false);
  const std::uint64_t key = 1;
  const auto g = sample_adjacency(gen, logits, std::span(&key, 1));
  for (double p : g.probabilities.data()) EXPECT_DOUBLE_EQ(p, 0.5);
  EXPECT_DOUBLE_EQ(sparsity(g.adjacency), 1.0);
}

TEST(Sample, SaturatedLogitsGiveNearCertainEdgesWithoutNoise) {
  Rng rng(8);
  GraphGenerator gen = small_generator(rng, NoiseMode::kLiteral);
  gen.lambda = 0.5;
  const std::int64_t n = 3;
  Tensor logits(Shape{n, n, 2});
  for (std::int64_t k = 0; k < n * n; ++k) {
    logits.mutable_data()[2 * k] = -10.0;
    logits.mutable_data()[2 * k + 1] = 10.0;
  }
  const std::uint64_t key = 3;
  const auto g = sample_adjacency(gen, logits, std::span(&key, 1));
  for (double a : g.adjacency.data()) EXPECT_EQ(a, 1.0);
  for (std::int64_t k = 0; k < n * n; ++k) EXPECT_GT(g.probabilities.data()[2 * k + 1], 1.0 - 1e-8);
}

TEST(Sample, EqualLogitsGiveFairCoinUnderGumbelNoise) {
  for (double tau : {0.5, 0.01}) {
    Rng rng(9);
    GraphGenerator gen = small_generator(rng, NoiseMode::kStandardGumbel, tau);
    Tensor logits(Shape{2, 2, 2});
    int edges = 0;
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
      const std::uint64_t key = 1000003ULL * d + 17;
      edges += sample_adjacency(gen, logits, std::span(&key, 1)).adjacency.data()[1] == 1.0;
    }
    EXPECT_NEAR(static_cast<double>(edges) / draws, 0.5, 0.02) << "tau " << tau;
  }
}

TEST(Sample, PerGraphKeysMakeBatchesDecomposable) {
  Rng rng(10);
  GraphGenerator gen = small_generator(rng);
  const std::int64_t M = 3, n = 4;
  Tensor obs = random_tensor({M, n, 4}, rng, 1.0, false);
  const std::vector<std::uint64_t> keys = {7, 8, 9};
  const auto batched = generate(gen, obs, keys);
  for (std::int64_t m = 0; m < M; ++m) {
    Tensor one = nx::reshape(nx::slice(obs, 0, m, m + 1), {n, 4});
    const auto single = generate(gen, one, std::span(&keys[m], 1));
    for (std::int64_t k = 0; k < n * n; ++k) {
      EXPECT_EQ(batched.adjacency.data()[m * n * n + k], single.adjacency.data()[k]);
    }
  }
  EXPECT_THROW(sample_adjacency(gen, pairwise_logits(gen, embed_observations(gen, obs)),
                                std::span(keys.data(), 2)),
               ShapeError);
}

TEST(Sample, RngOverloadIsReproducible) {
  Rng rng(11);
  GraphGenerator gen = small_generator(rng);
  Tensor logits = random_tensor({4, 4, 2}, rng, 1.0, false);
  Rng a(5), b(5);
  EXPECT_EQ(oracle::values(sample_adjacency(gen, logits, a).adjacency),
            oracle::values(sample_adjacency(gen, logits, b).adjacency));
}

TEST(Sample, InvalidTemperatureIsAConfigError) {
  Rng rng(12);
  GraphGenConfig cfg;
  cfg.obs_dim = 2;
  cfg.tau = 0.0;
  EXPECT_THROW(make_graph_generator(cfg, rng), ConfigError);
  cfg.tau = 0.5;
  cfg.lambda = -1.0;
  EXPECT_THROW(make_graph_generator(cfg, rng), ConfigError);
  EXPECT_THROW(parse_noise_mode("exponential"), ConfigError);
  EXPECT_EQ(parse_noise_mode(to_string(NoiseMode::kLiteral)), NoiseMode::kLiteral);
}

TEST(Gradients, SoftProbabilitiesPassFiniteDifferenceCheck) {
  Rng rng(13);
  for (int draw = 0; draw < 3; ++draw) {
    GraphGenerator gen = small_generator(rng);
    nx::ParamList params;
    collect_params(gen, "g", params);
    Tensor obs = random_tensor({3, 4}, rng);
    const std::uint64_t key = 77 + draw;
    auto inputs = nx::tensors_of(params);
    inputs.push_back(obs);
    const auto r = oracle::check_gradients(
        [&] { return oracle::probe(generate(gen, obs, std::span(&key, 1)).probabilities, 4); },
        inputs);
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(Gradients, HardAdjacencyRoutesGradientIntoBiGru) {
  Rng rng(14);
  GraphGenerator gen = small_generator(rng);
  Tensor obs = random_tensor({4, 4}, rng, 1.0, false);
  const std::uint64_t key = 5;
  {
    nx::Tape tape;
    tape.backward(oracle::probe(generate(gen, obs, std::span(&key, 1)).adjacency, 9));
  }
  for (const Tensor* t : {&gen.forward.w_input, &gen.backward.w_hidden, &gen.embed.layers[0].weight}) {
    ASSERT_TRUE(t->has_grad());
    double norm = 0.0;
    for (double g : t->grad()) norm += g * g;
    EXPECT_GT(norm, 0.0);
  }
}

TEST(Adjacency, FullAndSparsity) {
  const auto full = full_adjacency(3);
  EXPECT_EQ(full.entries, std::vector<double>(9, 1.0));
  EXPECT_EQ(full_adjacency(1).entries, std::vector<double>{1.0});
  EXPECT_THROW(full_adjacency(0), ShapeError);
  EXPECT_EQ(sparsity(full.to_tensor()), 0.0);
  Tensor a(Shape{3, 3}, {1, 0, 0, 1, 1, 0, 1, 1, 1});
  EXPECT_DOUBLE_EQ(sparsity(a), 0.5);
  EXPECT_DOUBLE_EQ(sparsity(Tensor(Shape{1, 1}, std::vector<double>{1.0})), 0.0);
}

}  // namespace
}  // namespace dagmix::graphgen
