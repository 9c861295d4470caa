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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>

#include "dagmix/numerics/ops.hpp"

namespace dagmix::oracle {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec relu(Vec v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
  return v;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec concat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

Vec values(const Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

Mat rows(const Tensor& t) {
  const auto r = t.dim(0), c = t.dim(1);
  Mat out(static_cast<std::size_t>(r), Vec(static_cast<std::size_t>(c)));
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out[i][j] = t.data()[static_cast<std::size_t>(i * c + j)];
  return out;
}

Vec affine(const Vec& x, const Mat& w, const Vec& b) {
  Vec out = b;
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * w[k][j];
    out[j] += acc;
  }
  return out;
}

Vec linear(const networks::Linear& layer, const Vec& x) {
  return affine(x, rows(layer.weight), values(layer.bias));
}

Vec mlp(const networks::Mlp& net, const Vec& x) {
  Vec h = x;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    h = linear(net.layers[k], h);
    switch (net.spec.activations[k]) {
      case networks::Activation::kRelu:
        h = relu(h);
        break;
      case networks::Activation::kTanh:
        for (double& v : h) v = std::tanh(v);
        break;
      case networks::Activation::kNone:
        break;
    }
  }
  return h;
}

Vec gru(const networks::GruCell& cell, const Vec& x, const Vec& h) {
  const std::size_t H = h.size();
  const Vec gi = affine(x, rows(cell.w_input), values(cell.b_input));
  const Vec gh = affine(h, rows(cell.w_hidden), values(cell.b_hidden));
  Vec out(H);
  for (std::size_t u = 0; u < H; ++u) {
    const double r = sigmoid(gi[u] + gh[u]);
    const double z = sigmoid(gi[H + u] + gh[H + u]);
    const double n = std::tanh(gi[2 * H + u] + r * gh[2 * H + u]);
    out[u] = (1.0 - z) * n + z * h[u];
  }
  return out;
}

std::vector<Vec> bigru(const networks::GruCell& fwd, const networks::GruCell& bwd,
                       const std::vector<Vec>& seq) {
  const std::size_t L = seq.size();
  std::vector<Vec> f(L), b(L);
  Vec h(static_cast<std::size_t>(fwd.hidden_size()), 0.0);
  for (std::size_t t = 0; t < L; ++t) f[t] = h = gru(fwd, seq[t], h);
  h.assign(static_cast<std::size_t>(bwd.hidden_size()), 0.0);
  for (std::size_t t = L; t-- > 0;) b[t] = h = gru(bwd, seq[t], h);
  std::vector<Vec> out(L);
  for (std::size_t t = 0; t < L; ++t) out[t] = concat(f[t], b[t]);
  return out;
}

HypernetValues hypernet(const networks::Hypernet& net, const Vec& state) {
  HypernetValues out;
  out.weights = mlp(net.weights, state);
  for (double& w : out.weights) w = std::fabs(w);
  out.bias = mlp(net.bias, state)[0];
  return out;
}

std::vector<std::vector<Vec>> pairwise_logits(const graphgen::GraphGenerator& gen,
                                              const std::vector<Vec>& x) {
  const std::size_t n = x.size();
  std::vector<std::vector<Vec>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Vec> seq;
    for (std::size_t j = 0; j < n; ++j) seq.push_back(concat(x[i], x[j]));
    for (const Vec& hj : bigru(gen.forward, gen.backward, seq)) {
      out[i].push_back(linear(gen.head, hj));
    }
  }
  return out;
}

double gumbel(std::uint64_t key, std::uint64_t counter) {
  const std::uint64_t bits = mix64(mix64(key) ^ mix64(counter));
  const double u = (static_cast<double>(bits >> 11) + 0.5) / 9007199254740992.0;
  return -std::log(-std::log(u));
}

SampledGraph sample(const graphgen::GraphGenerator& gen,
                    const std::vector<std::vector<Vec>>& logits, std::uint64_t key) {
  const std::size_t n = logits.size();
  SampledGraph out;
  out.adjacency.assign(n, Vec(n, 0.0));
  out.probs.assign(n, std::vector<Vec>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double y[2];
      for (std::size_t c = 0; c < 2; ++c) {
        const double a = logits[i][j][c];
        double perturbed;
        if (gen.noise_mode == graphgen::NoiseMode::kStandardGumbel) {
          perturbed = a + gumbel(key, (i * n + j) * 2 + c);
        } else {
          perturbed = a + std::log(gen.lambda * std::exp(-gen.lambda * a));
        }
        y[c] = perturbed / gen.tau;
      }
      const double m = std::max(y[0], y[1]);
      const double e0 = std::exp(y[0] - m), e1 = std::exp(y[1] - m);
      out.probs[i][j] = {e0 / (e0 + e1), e1 / (e0 + e1)};
      out.adjacency[i][j] = i == j ? 1.0 : (out.probs[i][j][1] > out.probs[i][j][0] ? 1.0 : 0.0);
    }
  }
  return out;
}

Attention attention(const mixers::AttentionParams& params, const std::vector<Vec>& x,
                    const Mat& adjacency, const Vec& q) {
  const std::size_t n = x.size();
  const Mat wq = rows(params.w_query), wk = rows(params.w_key);
  const std::size_t dk = wq[0].size();
  std::vector<Vec> query(n, Vec(dk, 0.0)), key(n, Vec(dk, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    query[a] = affine(x[a], wq, Vec(dk, 0.0));
    key[a] = affine(x[a], wk, Vec(dk, 0.0));
  }
  Attention out;
  out.mixed.assign(n, 0.0);
  out.weights.assign(n, Vec(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    Vec score(n, 0.0);
    double best = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      if (adjacency[a][i] == 0.0) continue;
      for (std::size_t k = 0; k < dk; ++k) score[i] += query[a][k] * key[i][k];
      score[i] /= std::sqrt(static_cast<double>(dk));
      best = std::max(best, score[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (adjacency[a][i] == 0.0) continue;
      out.weights[a][i] = std::exp(score[i] - best);
      total += out.weights[a][i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.weights[a][i] /= total;
      out.mixed[a] += out.weights[a][i] * q[i];
    }
  }
  return out;
}

DagmixForward dagmix_forward(const graphgen::GraphGenerator& gen, const mixers::Mixer& mixer,
                             const std::vector<Vec>& obs, const Vec& state, const Vec& q,
                             std::uint64_t key) {
  std::vector<Vec> graph_x, mix_x;
  for (const Vec& o : obs) {
    graph_x.push_back(mlp(gen.embed, o));
    mix_x.push_back(mlp(mixer.encoder, o));
  }
  DagmixForward out;
  out.adjacency = sample(gen, pairwise_logits(gen, graph_x), key).adjacency;
  out.attention = attention(mixer.attention, mix_x, out.adjacency, q);
  const HypernetValues hv = hypernet(mixer.hypernet, state);
  out.q_total = hv.bias;
  for (std::size_t a = 0; a < q.size(); ++a) out.q_total += hv.weights[a] * out.attention.mixed[a];
  return out;
}

AgentStep agent_step(const agents::AgentNet& net, const Vec& obs, int last_action, int agent,
                     const Vec& hidden) {
  Vec input = obs;
  for (std::int64_t k = 0; k < net.n_actions; ++k) input.push_back(k == last_action ? 1.0 : 0.0);
  for (std::int64_t k = 0; k < net.n_agents; ++k) input.push_back(k == agent ? 1.0 : 0.0);
  AgentStep out;
  out.hidden = gru(net.gru, relu(linear(net.input, input)), hidden);
  out.q = linear(net.head, out.hidden);
  return out;
}

GradCheck check_gradients(const std::function<Tensor()>& loss,
                          const std::vector<Tensor>& inputs, double h) {
  std::vector<Tensor> params = inputs;
  for (Tensor& t : params) t.zero_grad();
  {
    numerics::Tape tape;
    tape.backward(loss());
  }
  GradCheck out;
  numerics::NoGradGuard no_grad;
  for (Tensor& t : params) {
    const Vec analytic = t.has_grad() ? Vec(t.grad().begin(), t.grad().end())
                                      : Vec(static_cast<std::size_t>(t.size()), 0.0);
    auto data = t.mutable_data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + h;
      const double up = loss().item();
      data[k] = saved - h;
      const double down = loss().item();
      data[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::fabs(analytic[k]), std::fabs(fd), 1e-6});
      out.max_rel_error = std::max(out.max_rel_error, std::fabs(analytic[k] - fd) / denom);
      ++out.entries;
    }
  }
  return out;
}

Tensor random_tensor(numerics::Shape shape, Rng& rng, double bound, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  for (double& v : t.mutable_data()) v = uniform_real(rng, -bound, bound);
  return t;
}

void randomize(const numerics::ParamList& params, Rng& rng, double bound) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (double& v : t.mutable_data()) v = uniform_real(rng, -bound, bound);
  }
}

Tensor probe(const Tensor& t, std::uint64_t seed) {
  Rng rng(seed);
  Tensor weights = random_tensor(t.shape(), rng, 1.0, false);
  return numerics::sum_all(numerics::mul(t, weights));
}

}  // namespace dagmix::oracle
