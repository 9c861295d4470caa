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

#include "dagmix/graphgen.hpp"

#include <cmath>

#include "dagmix/errors.hpp"
#include "dagmix/numerics/ops.hpp"

namespace dagmix::graphgen {

namespace nx = numerics;
using networks::Activation;

std::string to_string(NoiseMode mode) {
  return mode == NoiseMode::kLiteral ? "literal_eq2" : "standard_gumbel";
}

NoiseMode parse_noise_mode(const std::string& text) {
  if (text == "literal_eq2") return NoiseMode::kLiteral;
  if (text == "standard_gumbel") return NoiseMode::kStandardGumbel;
  throw ConfigError("noise_mode must be one of {literal_eq2, standard_gumbel}, got '" + text +
                    "'");
}

GraphGenerator make_graph_generator(const GraphGenConfig& config, Rng& rng) {
  if (!(config.tau > 0.0)) throw ConfigError("gumbel temperature tau must be > 0");
  if (!(config.lambda > 0.0)) throw ConfigError("gumbel lambda must be > 0");
  GraphGenerator gen;
  gen.embed = networks::make_mlp(
      {{config.obs_dim, config.embed_dim}, {Activation::kRelu}}, rng);
  gen.forward = networks::make_gru(2 * config.embed_dim, config.hidden, rng);
  gen.backward = networks::make_gru(2 * config.embed_dim, config.hidden, rng);
  gen.head = networks::make_linear(2 * config.hidden, 2, rng);
  gen.tau = config.tau;
  gen.lambda = config.lambda;
  gen.noise_mode = config.noise_mode;
  return gen;
}

void collect_params(const GraphGenerator& gen, const std::string& prefix,
                    numerics::ParamList& out) {
  networks::collect_params(gen.embed, prefix + ".embed", out);
  networks::collect_params(gen.forward, prefix + ".gru_fwd", out);
  networks::collect_params(gen.backward, prefix + ".gru_bwd", out);
  networks::collect_params(gen.head, prefix + ".head", out);
}

Tensor AdjacencyMatrix::to_tensor() const { return Tensor({n, n}, entries); }

AdjacencyMatrix full_adjacency(std::int64_t n) {
  if (n < 1) throw ShapeError("full_adjacency: n must be >= 1");
  return {n, std::vector<double>(static_cast<std::size_t>(n * n), 1.0), true};
}

Tensor full_adjacency(std::int64_t batch, std::int64_t n) {
  if (n < 1) throw ShapeError("full_adjacency: n must be >= 1");
  return Tensor::filled({batch, n, n}, 1.0);
}

AdjacencyMatrix to_adjacency(const Tensor& adjacency) {
  if (adjacency.rank() != 2 || adjacency.dim(0) != adjacency.dim(1)) {
    throw ShapeError("to_adjacency: expected [n, n], got " + nx::to_string(adjacency.shape()));
  }
  AdjacencyMatrix a;
  a.n = adjacency.dim(0);
  a.entries.assign(adjacency.data().begin(), adjacency.data().end());
  a.hard = true;
  for (double v : a.entries) a.hard = a.hard && (v == 0.0 || v == 1.0);
  return a;
}

Tensor embed_observations(const GraphGenerator& gen, const Tensor& obs) {
  if (obs.rank() < 2 || obs.dim(-2) < 1) {
    throw ShapeError("embed_observations: expected [..., n, O] with n >= 1, got " +
                     nx::to_string(obs.shape()));
  }
  return networks::mlp_forward(gen.embed, obs);
}

Tensor pairwise_logits(const GraphGenerator& gen, const Tensor& x) {
  const bool single = x.rank() == 2;
  if (!single && x.rank() != 3) throw ShapeError("pairwise_logits: expected [n, E] or [M, n, E]");
  const Tensor xb = single ? nx::reshape(x, {1, x.dim(0), x.dim(1)}) : x;
  const std::int64_t M = xb.dim(0), n = xb.dim(1), E = xb.dim(2);
  if (n == 0) throw ShapeError("pairwise_logits: no agents");
  if (E != gen.embed_dim() || gen.forward.input_size() != 2 * E) {
    throw ShapeError("pairwise_logits: embedding width " + std::to_string(E));
  }
  const std::int64_t H = gen.forward.hidden_size();

  // [x_i, x_j] W + b = x_i W_top + (x_j W_bottom + b); the first term is
  // shared by every position of row i, the second by every row at position j.
  auto project = [&](const networks::GruCell& cell) {
    Tensor query = nx::matmul(nx::reshape(xb, {M * n, E}), nx::slice(cell.w_input, 0, 0, E));
    Tensor partner =
        nx::linear(nx::reshape(xb, {M * n, E}), nx::slice(cell.w_input, 0, E, 2 * E), cell.b_input);
    return std::pair{nx::reshape(query, {M, n, 3 * H}), nx::reshape(partner, {M, n, 3 * H})};
  };
  const auto fwd_proj = project(gen.forward);
  const auto bwd_proj = project(gen.backward);
  auto step = [&](const networks::GruCell& cell, const std::pair<Tensor, Tensor>& proj,
                  std::int64_t j, const Tensor& h) {
    return nx::gru_cell_pair(proj.first, proj.second, j, h, cell.w_hidden, cell.b_hidden);
  };
  std::vector<Tensor> fwd(static_cast<std::size_t>(n)), bwd(static_cast<std::size_t>(n));
  Tensor h(nx::Shape{M * n, H});
  for (std::int64_t j = 0; j < n; ++j) {
    h = step(gen.forward, fwd_proj, j, h);
    fwd[static_cast<std::size_t>(j)] = h;
  }
  h = Tensor(nx::Shape{M * n, H});
  for (std::int64_t j = n - 1; j >= 0; --j) {
    h = step(gen.backward, bwd_proj, j, h);
    bwd[static_cast<std::size_t>(j)] = h;
  }
  // head([f, b]) = f W_top + b W_bottom + bias
  const Tensor head_top = nx::slice(gen.head.weight, 0, 0, H);
  const Tensor head_bottom = nx::slice(gen.head.weight, 0, H, 2 * H);
  std::vector<Tensor> columns;
  columns.reserve(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < n; ++j) {
    Tensor col = nx::add(nx::linear(fwd[static_cast<std::size_t>(j)], head_top, gen.head.bias),
                         nx::matmul(bwd[static_cast<std::size_t>(j)], head_bottom));
    columns.push_back(nx::reshape(col, {M, n, 1, 2}));
  }
  Tensor logits = nx::concat(columns, 2);
  return single ? nx::reshape(logits, {n, n, 2}) : logits;
}

SampledGraph sample_adjacency(const GraphGenerator& gen, const Tensor& logits,
                              std::span<const std::uint64_t> row_keys) {
  if (!(gen.tau > 0.0)) throw ConfigError("gumbel temperature tau must be > 0");
  const bool single = logits.rank() == 3;
  if ((!single && logits.rank() != 4) || logits.dim(-1) != 2 ||
      logits.dim(-2) != logits.dim(-3)) {
    throw ShapeError("sample_adjacency: expected [..., n, n, 2], got " +
                     nx::to_string(logits.shape()));
  }
  const std::int64_t M = single ? 1 : logits.dim(0);
  const std::int64_t n = logits.dim(-2);
  if (static_cast<std::int64_t>(row_keys.size()) != M) {
    throw ShapeError("sample_adjacency: need one noise key per graph");
  }
  for (double v : logits.data()) {
    if (!std::isfinite(v)) throw Error("sample_adjacency: non-finite logit");
  }

  Tensor perturbed;
  if (gen.noise_mode == NoiseMode::kStandardGumbel) {
    Tensor noise(logits.shape());
    auto g = noise.mutable_data();
    const std::int64_t per_graph = n * n * 2;
    for (std::int64_t m = 0; m < M; ++m) {
      CounterStream stream(row_keys[static_cast<std::size_t>(m)]);
      for (std::int64_t k = 0; k < per_graph; ++k) {
        const double u = stream.uniform(static_cast<std::uint64_t>(k));
        g[static_cast<std::size_t>(m * per_graph + k)] = -std::log(-std::log(u));
      }
    }
    perturbed = nx::add(logits, noise);
  } else {
    // a + log(lambda e^{-lambda a}) = a + log(lambda) - lambda a
    perturbed = nx::add_scalar(nx::scale(logits, 1.0 - gen.lambda), std::log(gen.lambda));
  }
  Tensor probabilities = nx::softmax(nx::scale(perturbed, 1.0 / gen.tau), -1);

  nx::Shape graph_shape(logits.shape().begin(), logits.shape().end() - 1);
  Tensor edge_prob = nx::reshape(nx::slice(probabilities, -1, 1, 2), graph_shape);
  Tensor hard(graph_shape);
  Tensor off_diagonal(graph_shape);
  {
    auto p = probabilities.data();
    auto a = hard.mutable_data();
    auto od = off_diagonal.mutable_data();
    for (std::int64_t m = 0; m < M; ++m) {
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
          const auto cell = static_cast<std::size_t>((m * n + i) * n + j);
          if (i == j) {
            a[cell] = 1.0;
            od[cell] = 0.0;
          } else {
            // argmax of the two components, ties to component 0
            a[cell] = p[2 * cell + 1] > p[2 * cell] ? 1.0 : 0.0;
            od[cell] = 1.0;
          }
        }
      }
    }
  }
  Tensor adjacency = nx::straight_through(hard, nx::mul(edge_prob, off_diagonal));
  return {adjacency, probabilities};
}

SampledGraph sample_adjacency(const GraphGenerator& gen, const Tensor& logits, Rng& rng) {
  const std::int64_t M = logits.rank() == 4 ? logits.dim(0) : 1;
  const std::uint64_t base = rng();
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(M));
  for (std::int64_t m = 0; m < M; ++m) keys[static_cast<std::size_t>(m)] = base + static_cast<std::uint64_t>(m);
  return sample_adjacency(gen, logits, keys);
}

SampledGraph generate(const GraphGenerator& gen, const Tensor& obs,
                      std::span<const std::uint64_t> row_keys) {
  return sample_adjacency(gen, pairwise_logits(gen, embed_observations(gen, obs)), row_keys);
}

double sparsity(const Tensor& adjacency) {
  if (adjacency.rank() < 2) throw ShapeError("sparsity: expected [..., n, n]");
  const std::int64_t n = adjacency.dim(-1);
  if (n <= 1 || adjacency.size() == 0) return 0.0;
  const std::int64_t graphs = adjacency.size() / (n * n);
  auto a = adjacency.data();
  std::int64_t zeros = 0;
  for (std::int64_t m = 0; m < graphs; ++m)
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        if (i != j && a[static_cast<std::size_t>((m * n + i) * n + j)] == 0.0) ++zeros;
  return static_cast<double>(zeros) / static_cast<double>(graphs * n * (n - 1));
}

}  // namespace dagmix::graphgen
