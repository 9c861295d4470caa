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

#include "dagmix/networks.hpp"

#include <cmath>

#include "dagmix/errors.hpp"
#include "dagmix/numerics/ops.hpp"

namespace dagmix::networks {

namespace nx = numerics;

namespace {

Tensor uniform_tensor(nx::Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape), true);
  for (double& v : t.mutable_data()) v = uniform_real(rng, -bound, bound);
  return t;
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return nx::relu(x);
    case Activation::kTanh:
      return nx::tanh(x);
    case Activation::kNone:
      break;
  }
  return x;
}

}  // namespace


Linear make_linear(std::int64_t in, std::int64_t out, Rng& rng) {
  if (in <= 0 || out <= 0) throw ShapeError("make_linear: widths must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear layer;
  layer.weight = uniform_tensor({in, out}, bound, rng);
  layer.bias = uniform_tensor({out}, bound, rng);
  return layer;
}

Tensor linear_forward(const Linear& layer, const Tensor& x) {
  if (x.rank() < 1 || x.dim(-1) != layer.in_features()) {
    throw ShapeError("linear: input " + nx::to_string(x.shape()) + " for layer width " +
                     std::to_string(layer.in_features()));
  }
  if (x.rank() == 2) return nx::linear(x, layer.weight, layer.bias);
  nx::Shape out_shape = x.shape();
  out_shape.back() = layer.out_features();
  Tensor flat = nx::reshape(x, {x.size() / layer.in_features(), layer.in_features()});
  return nx::reshape(nx::linear(flat, layer.weight, layer.bias), out_shape);
}

Mlp make_mlp(const MlpSpec& spec, Rng& rng) {
  if (spec.widths.size() < 2) throw ShapeError("MlpSpec needs at least one layer");
  if (spec.activations.size() != spec.widths.size() - 1) {
    throw ShapeError("MlpSpec: one activation per layer required");
  }
  Mlp mlp;
  mlp.spec = spec;
  for (std::size_t k = 0; k + 1 < spec.widths.size(); ++k) {
    mlp.layers.push_back(make_linear(spec.widths[k], spec.widths[k + 1], rng));
  }
  return mlp;
}

Tensor mlp_forward(const Mlp& mlp, const Tensor& x) {
  Tensor h = x;
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    h = activate(linear_forward(mlp.layers[k], h), mlp.spec.activations[k]);
  }
  return h;
}

GruCell make_gru(std::int64_t input_size, std::int64_t hidden_size, Rng& rng) {
  if (input_size <= 0 || hidden_size <= 0) throw ShapeError("make_gru: sizes must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  GruCell cell;
  cell.w_input = uniform_tensor({input_size, 3 * hidden_size}, bound, rng);
  cell.w_hidden = uniform_tensor({hidden_size, 3 * hidden_size}, bound, rng);
  cell.b_input = uniform_tensor({3 * hidden_size}, bound, rng);
  cell.b_hidden = uniform_tensor({3 * hidden_size}, bound, rng);
  return cell;
}

Tensor gru_step_projected(const GruCell& cell, const Tensor& input_gates, const Tensor& h) {
  const std::int64_t H = cell.hidden_size();
  if (h.rank() != 2 || h.dim(1) != H || input_gates.rank() != 2 ||
      input_gates.dim(1) != 3 * H || input_gates.dim(0) != h.dim(0)) {
    throw ShapeError("gru_step: gates " + nx::to_string(input_gates.shape()) + ", hidden " +
                     nx::to_string(h.shape()) + " for hidden size " + std::to_string(H));
  }
  return nx::gru_cell(input_gates, h, cell.w_hidden, cell.b_hidden);
}

Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h) {
  if (x.rank() != 2 || x.dim(1) != cell.input_size()) {
    throw ShapeError("gru_step: input " + nx::to_string(x.shape()) + " for input size " +
                     std::to_string(cell.input_size()));
  }
  return gru_step_projected(cell, nx::linear(x, cell.w_input, cell.b_input), h);
}

Tensor bigru_encode(const GruCell& forward, const GruCell& backward, const Tensor& seq) {
  if (seq.rank() != 3) throw ShapeError("bigru_encode: expected [L, B, I]");
  const std::int64_t L = seq.dim(0), B = seq.dim(1), I = seq.dim(2);
  if (L == 0) throw ShapeError("bigru_encode: empty sequence");
  if (forward.hidden_size() != backward.hidden_size()) {
    throw ShapeError("bigru_encode: direction hidden sizes differ");
  }
  const std::int64_t H = forward.hidden_size();
  std::vector<Tensor> steps;
  steps.reserve(static_cast<std::size_t>(L));
  for (std::int64_t t = 0; t < L; ++t) {
    steps.push_back(nx::reshape(nx::slice(seq, 0, t, t + 1), {B, I}));
  }
  std::vector<Tensor> fwd(static_cast<std::size_t>(L)), bwd(static_cast<std::size_t>(L));
  Tensor h(nx::Shape{B, H});
  for (std::int64_t t = 0; t < L; ++t) {
    h = gru_step(forward, steps[static_cast<std::size_t>(t)], h);
    fwd[static_cast<std::size_t>(t)] = h;
  }
  h = Tensor(nx::Shape{B, H});
  for (std::int64_t t = L - 1; t >= 0; --t) {
    h = gru_step(backward, steps[static_cast<std::size_t>(t)], h);
    bwd[static_cast<std::size_t>(t)] = h;
  }
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(L));
  for (std::int64_t t = 0; t < L; ++t) {
    out.push_back(nx::reshape(
        nx::concat({fwd[static_cast<std::size_t>(t)], bwd[static_cast<std::size_t>(t)]}, 1),
        {1, B, 2 * H}));
  }
  return nx::concat(out, 0);
}

Hypernet make_hypernet(std::int64_t state_dim, std::int64_t n_agents, std::int64_t hidden,
                       Rng& rng) {
  Hypernet net;
  net.weights = make_mlp({{state_dim, hidden, n_agents}, {Activation::kRelu, Activation::kNone}},
                         rng);
  net.bias = make_mlp({{state_dim, hidden, 1}, {Activation::kRelu, Activation::kNone}}, rng);
  return net;
}

HypernetOutput hypernet_forward(const Hypernet& net, const Tensor& state) {
  if (state.rank() != 2 || state.dim(1) != net.state_dim()) {
    throw ShapeError("hypernet: state " + nx::to_string(state.shape()) + " for state width " +
                     std::to_string(net.state_dim()));
  }
  return {nx::abs(mlp_forward(net.weights, state)), mlp_forward(net.bias, state)};
}

void collect_params(const Linear& layer, const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", layer.weight});
  out.push_back({prefix + ".bias", layer.bias});
}

void collect_params(const Mlp& mlp, const std::string& prefix, ParamList& out) {
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    collect_params(mlp.layers[k], prefix + "." + std::to_string(k), out);
  }
}

void collect_params(const GruCell& cell, const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".w_input", cell.w_input});
  out.push_back({prefix + ".w_hidden", cell.w_hidden});
  out.push_back({prefix + ".b_input", cell.b_input});
  out.push_back({prefix + ".b_hidden", cell.b_hidden});
}

void collect_params(const Hypernet& net, const std::string& prefix, ParamList& out) {
  collect_params(net.weights, prefix + ".weights", out);
  collect_params(net.bias, prefix + ".bias", out);
}

}  // namespace dagmix::networks
