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

#include <benchmark/benchmark.h>

#include "dagmix/envs.hpp"
#include "dagmix/graphgen.hpp"
#include "dagmix/numerics/ops.hpp"
#include "dagmix/training.hpp"

namespace {

using dagmix::Rng;
using dagmix::numerics::Tensor;
namespace nx = dagmix::numerics;

Tensor random_tensor(nx::Shape shape, Rng& rng, bool grad = false) {
  Tensor t(std::move(shape), grad);
  for (double& v : t.mutable_data()) v = dagmix::uniform_real(rng, -1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  Rng rng(1);
  const auto m = state.range(0);
  Tensor a = random_tensor({m, 32}, rng), b = random_tensor({32, 96}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nx::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * m * 32 * 96);
}
BENCHMARK(BM_Matmul)->Arg(256)->Arg(6400);

void BM_GruCellForwardBackward(benchmark::State& state) {
  Rng rng(2);
  const auto B = state.range(0);
  const std::int64_t H = 32;
  Tensor gates = random_tensor({B, 3 * H}, rng, true), h = random_tensor({B, H}, rng, true);
  Tensor w = random_tensor({H, 3 * H}, rng, true), b = random_tensor({3 * H}, rng, true);
  for (auto _ : state) {
    nx::Tape tape;
    Tensor loss = nx::sum_all(nx::gru_cell(gates, h, w, b));
    tape.backward(loss);
  }
}
BENCHMARK(BM_GruCellForwardBackward)->Arg(6400);

void BM_GenerateGraph(benchmark::State& state) {
  Rng rng(3);
  const auto M = state.range(0), n = state.range(1);
  dagmix::graphgen::GraphGenConfig cfg;
  cfg.obs_dim = 20;
  auto gen = dagmix::graphgen::make_graph_generator(cfg, rng);
  Tensor obs = random_tensor({M, n, 20}, rng);
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(M));
  for (std::size_t k = 0; k < keys.size(); ++k) keys[k] = k;
  for (auto _ : state) {
    nx::NoGradGuard no_grad;
    benchmark::DoNotOptimize(dagmix::graphgen::generate(gen, obs, keys).adjacency);
  }
}
BENCHMARK(BM_GenerateGraph)->Args({800, 8})->Args({32, 25})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto kind = static_cast<dagmix::mixers::MixerKind>(state.range(0));
  const std::string env_key = state.range(1) == 8 ? "spread8" : "spread25";
  dagmix::RunConfig config;
  config.algo = kind;
  config.env = env_key;
  auto env = dagmix::envs::make_env(env_key);
  Rng rng(4);
  dagmix::training::Learner learner(
      dagmix::training::make_model(dagmix::training::model_config_for(config, *env), rng), config);
  dagmix::training::ReplayBuffer buffer(64);
  for (int k = 0; k < 32; ++k) {
    dagmix::training::collect_episode(*env, learner.online(), 1.0, rng, buffer);
  }
  auto sampled = buffer.sample(32, rng);
  const auto batch = dagmix::training::make_batch(sampled);
  std::uint64_t key = 0;
  for (auto _ : state) benchmark::DoNotOptimize(learner.train_step(batch, key++).loss);
  state.counters["rows"] = static_cast<double>(batch.batch * batch.max_len);
}
BENCHMARK(BM_TrainStep)
    ->ArgsProduct({{0, 1, 2}, {8}})
    ->Unit(benchmark::kMillisecond)
    ->Iterations(3);
BENCHMARK(BM_TrainStep)->Args({2, 25})->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
