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

#include "dagmix/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "dagmix/errors.hpp"

namespace dagmix::numerics {

namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + to_string(t.shape()));
  }
}

struct BroadcastPlan {
  Shape out;
  std::vector<std::int64_t> stride_a;
  std::vector<std::int64_t> stride_b;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  BroadcastPlan plan;
  plan.out.resize(rank);
  plan.stride_a.assign(rank, 0);
  plan.stride_b.assign(rank, 0);
  std::int64_t sa = 1, sb = 1;
  for (std::size_t k = rank; k-- > 0;) {
    if (pa[k] != pb[k] && pa[k] != 1 && pb[k] != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) +
                       " with " + to_string(b));
    }
    plan.out[k] = std::max(pa[k], pb[k]);
    if (pa[k] == 0 || pb[k] == 0) plan.out[k] = 0;
    plan.stride_a[k] = pa[k] == 1 ? 0 : sa;
    plan.stride_b[k] = pb[k] == 1 ? 0 : sb;
    sa *= pa[k];
    sb *= pb[k];
  }
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const std::int64_t total = numel(plan.out);
  if (total == 0) return;
  const std::size_t rank = plan.out.size();
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  const std::int64_t inner = plan.out[rank - 1];
  const std::int64_t ia_step = plan.stride_a[rank - 1];
  const std::int64_t ib_step = plan.stride_b[rank - 1];
  std::vector<std::int64_t> counter(rank, 0);
  std::int64_t base_a = 0, base_b = 0;
  for (std::int64_t o = 0; o < total; o += inner) {
    std::int64_t ia = base_a, ib = base_b;
    for (std::int64_t k = 0; k < inner; ++k) {
      f(o + k, ia, ib);
      ia += ia_step;
      ib += ib_step;
    }
    // advance the outer counters
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++counter[d];
      base_a += plan.stride_a[d];
      base_b += plan.stride_b[d];
      if (counter[d] < plan.out[d]) break;
      base_a -= plan.stride_a[d] * counter[d];
      base_b -= plan.stride_b[d] * counter[d];
      counter[d] = 0;
    }
  }
}

template <class Fwd, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 DA da, DB db) {
  const bool same = a.shape() == b.shape();
  if (same) {
    Tensor out(a.shape());
    auto o = out.mutable_data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i], y[i]);
    if (detail::should_record({&a, &b})) {
      TensorImpl* pa = a.impl().get();
      TensorImpl* pb = b.impl().get();
      TensorImpl* po = out.impl().get();
      detail::record({&a, &b}, out, [pa, pb, po, da, db] {
        const auto& g = po->grad;
        if (pa->requires_grad) {
          auto& ga = detail::grad_buffer(*pa);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * da(pa->data[i], pb->data[i]);
        }
        if (pb->requires_grad) {
          auto& gb = detail::grad_buffer(*pb);
          for (std::size_t i = 0; i < g.size(); ++i)
            gb[i] += g[i] * db(pa->data[i], pb->data[i]);
        }
      });
    }
    return out;
  }
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape(), name));
  Tensor out(plan->out);
  {
    auto o = out.mutable_data();
    auto x = a.data();
    auto y = b.data();
    for_each_broadcast(*plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      o[static_cast<std::size_t>(i)] =
          fwd(x[static_cast<std::size_t>(ia)], y[static_cast<std::size_t>(ib)]);
    });
  }
  if (detail::should_record({&a, &b})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* pb = b.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a, &b}, out, [pa, pb, po, plan, da, db] {
      const auto& g = po->grad;
      const auto& x = pa->data;
      const auto& y = pb->data;
      if (pa->requires_grad) {
        auto& ga = detail::grad_buffer(*pa);
        for_each_broadcast(*plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
          ga[static_cast<std::size_t>(ia)] +=
              g[static_cast<std::size_t>(i)] *
              da(x[static_cast<std::size_t>(ia)], y[static_cast<std::size_t>(ib)]);
        });
      }
      if (pb->requires_grad) {
        auto& gb = detail::grad_buffer(*pb);
        for_each_broadcast(*plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
          gb[static_cast<std::size_t>(ib)] +=
              g[static_cast<std::size_t>(i)] *
              db(x[static_cast<std::size_t>(ia)], y[static_cast<std::size_t>(ib)]);
        });
      }
    });
  }
  return out;
}

// `deriv(x, y)` is dy/dx given input x and output y.
template <class Fwd, class Deriv>
Tensor unary_op(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i]);
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a}, out, [pa, po, deriv] {
      auto& ga = detail::grad_buffer(*pa);
      const auto& g = po->grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * deriv(pa->data[i], po->data[i]);
    });
  }
  return out;
}

// Splits `shape` around `axis` into (outer, length, inner).
struct AxisSplit {
  std::int64_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  for (int k = 0; k < axis; ++k) s.outer *= shape[static_cast<std::size_t>(k)];
  s.length = shape[static_cast<std::size_t>(axis)];
  for (std::size_t k = static_cast<std::size_t>(axis) + 1; k < shape.size(); ++k)
    s.inner *= shape[k];
  return s;
}

Shape reduced_shape(const Shape& shape, int axis, bool keepdim) {
  Shape out = shape;
  if (keepdim) {
    out[static_cast<std::size_t>(axis)] = 1;
  } else {
    out.erase(out.begin() + axis);
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  Map(out.mutable_data().data(), m, n).noalias() =
      MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  if (detail::should_record({&a, &b})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* pb = b.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a, &b}, out, [pa, pb, po, m, k, n] {
      MapC g(po->grad.data(), m, n);
      if (pa->requires_grad) {
        Map(detail::grad_buffer(*pa).data(), m, k).noalias() +=
            g * MapC(pb->data.data(), k, n).transpose();
      }
      if (pb->requires_grad) {
        Map(detail::grad_buffer(*pb).data(), k, n).noalias() +=
            MapC(pa->data.data(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != batch || b.dim(1) != k) {
    throw ShapeError("bmm: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tensor out(Shape{batch, m, n});
  for (std::int64_t i = 0; i < batch; ++i) {
    Map(out.mutable_data().data() + i * m * n, m, n).noalias() =
        MapC(a.data().data() + i * m * k, m, k) * MapC(b.data().data() + i * k * n, k, n);
  }
  if (detail::should_record({&a, &b})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* pb = b.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a, &b}, out, [pa, pb, po, batch, m, k, n] {
      for (std::int64_t i = 0; i < batch; ++i) {
        MapC g(po->grad.data() + i * m * n, m, n);
        if (pa->requires_grad) {
          Map(detail::grad_buffer(*pa).data() + i * m * k, m, k).noalias() +=
              g * MapC(pb->data.data() + i * k * n, k, n).transpose();
        }
        if (pb->requires_grad) {
          Map(detail::grad_buffer(*pb).data() + i * k * n, k, n).noalias() +=
              MapC(pa->data.data() + i * m * k, m, k).transpose() * g;
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary_op(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int rank = parts[0].rank();
  const int ax = normalize_axis(axis, rank);
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(ax)] = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != ax && p.shape()[static_cast<std::size_t>(d)] !=
                         parts[0].shape()[static_cast<std::size_t>(d)]) {
        throw ShapeError("concat: " + to_string(p.shape()) + " vs " +
                         to_string(parts[0].shape()));
      }
    }
    out_shape[static_cast<std::size_t>(ax)] += p.shape()[static_cast<std::size_t>(ax)];
  }
  const AxisSplit s = split_axis(out_shape, ax);
  Tensor out(out_shape);
  auto o = out.mutable_data();
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t chunk = p.shape()[static_cast<std::size_t>(ax)] * s.inner;
    const auto src = p.data();
    for (std::int64_t r = 0; r < s.outer; ++r) {
      std::copy_n(src.begin() + r * chunk, chunk,
                  o.begin() + r * s.length * s.inner + offset);
    }
    offsets.push_back(offset);
    offset += chunk;
  }
  bool any = false;
  if (Tape::active() != nullptr) {
    for (const auto& p : parts) any = any || p.requires_grad();
  }
  if (any) {
    std::vector<TensorImpl*> impls;
    for (const auto& p : parts) impls.push_back(p.impl().get());
    TensorImpl* po = out.impl().get();
    const std::int64_t row = s.length * s.inner;
    detail::record(parts, out, [impls, offsets, po, s, row, ax] {
      for (std::size_t k = 0; k < impls.size(); ++k) {
        TensorImpl* p = impls[k];
        if (!p->requires_grad) continue;
        auto& g = detail::grad_buffer(*p);
        const std::int64_t chunk = p->shape[static_cast<std::size_t>(ax)] * s.inner;
        for (std::int64_t r = 0; r < s.outer; ++r) {
          const double* src = po->grad.data() + r * row + offsets[k];
          double* dst = g.data() + r * chunk;
          for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& a, int axis, std::int64_t begin, std::int64_t end) {
  const int ax = normalize_axis(axis, a.rank());
  const std::int64_t len = a.shape()[static_cast<std::size_t>(ax)];
  if (begin < 0 || end > len || begin > end) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + to_string(a.shape()));
  }
  const AxisSplit s = split_axis(a.shape(), ax);
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(ax)] = end - begin;
  Tensor out(out_shape);
  const std::int64_t chunk = (end - begin) * s.inner;
  const std::int64_t row = s.length * s.inner;
  const std::int64_t offset = begin * s.inner;
  {
    auto src = a.data();
    auto dst = out.mutable_data();
    for (std::int64_t r = 0; r < s.outer; ++r) {
      std::copy_n(src.begin() + r * row + offset, chunk, dst.begin() + r * chunk);
    }
  }
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a}, out, [pa, po, s, chunk, row, offset] {
      auto& g = detail::grad_buffer(*pa);
      for (std::int64_t r = 0; r < s.outer; ++r) {
        const double* src = po->grad.data() + r * chunk;
        double* dst = g.data() + r * row + offset;
        for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a}, out, [pa, po] {
      auto& g = detail::grad_buffer(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += po->grad[i];
    });
  }
  return out;
}

Tensor transpose(const Tensor& a, int axis0, int axis1) {
  const int rank = a.rank();
  const int d0 = normalize_axis(axis0, rank);
  const int d1 = normalize_axis(axis1, rank);
  Shape out_shape = a.shape();
  std::swap(out_shape[static_cast<std::size_t>(d0)], out_shape[static_cast<std::size_t>(d1)]);
  // stride of each output dim inside the input buffer
  std::vector<std::int64_t> in_strides(static_cast<std::size_t>(rank), 1);
  for (int k = rank - 2; k >= 0; --k) {
    in_strides[static_cast<std::size_t>(k)] =
        in_strides[static_cast<std::size_t>(k + 1)] * a.shape()[static_cast<std::size_t>(k + 1)];
  }
  std::swap(in_strides[static_cast<std::size_t>(d0)], in_strides[static_cast<std::size_t>(d1)]);
  BroadcastPlan plan;
  plan.out = out_shape;
  plan.stride_a = in_strides;
  plan.stride_b.assign(static_cast<std::size_t>(rank), 0);
  auto shared_plan = std::make_shared<BroadcastPlan>(std::move(plan));
  Tensor out(out_shape);
  {
    auto src = a.data();
    auto dst = out.mutable_data();
    for_each_broadcast(*shared_plan, [&](std::int64_t o, std::int64_t i, std::int64_t) {
      dst[static_cast<std::size_t>(o)] = src[static_cast<std::size_t>(i)];
    });
  }
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a}, out, [pa, po, shared_plan] {
      auto& g = detail::grad_buffer(*pa);
      for_each_broadcast(*shared_plan, [&](std::int64_t o, std::int64_t i, std::int64_t) {
        g[static_cast<std::size_t>(i)] += po->grad[static_cast<std::size_t>(o)];
      });
    });
  }
  return out;
}

Tensor sum(const Tensor& a, int axis, bool keepdim) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  Tensor out(reduced_shape(a.shape(), ax, keepdim));
  {
    auto src = a.data();
    auto dst = out.mutable_data();
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t l = 0; l < s.length; ++l) {
        const double* row = src.data() + (o * s.length + l) * s.inner;
        double* acc = dst.data() + o * s.inner;
        for (std::int64_t i = 0; i < s.inner; ++i) acc[i] += row[i];
      }
    }
  }
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a}, out, [pa, po, s] {
      auto& g = detail::grad_buffer(*pa);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        const double* go = po->grad.data() + o * s.inner;
        for (std::int64_t l = 0; l < s.length; ++l) {
          double* row = g.data() + (o * s.length + l) * s.inner;
          for (std::int64_t i = 0; i < s.inner; ++i) row[i] += go[i];
        }
      }
    });
  }
  return out;
}

Tensor mean(const Tensor& a, int axis, bool keepdim) {
  const int ax = normalize_axis(axis, a.rank());
  const auto len = a.shape()[static_cast<std::size_t>(ax)];
  if (len == 0) throw ShapeError("mean over an empty axis");
  return scale(sum(a, ax, keepdim), 1.0 / static_cast<double>(len));
}

Tensor sum_all(const Tensor& a) {
  return sum(reshape(a, Shape{a.size()}), 0);
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

MaxResult max(const Tensor& a, int axis) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  if (s.length == 0) throw ShapeError("max over an empty axis");
  MaxResult result;
  result.values = Tensor(reduced_shape(a.shape(), ax, false));
  result.indices.assign(static_cast<std::size_t>(s.outer * s.inner), 0);
  auto src = a.data();
  auto dst = result.values.mutable_data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      std::int64_t best = 0;
      double best_value = src[static_cast<std::size_t>(o * s.length * s.inner + i)];
      for (std::int64_t l = 1; l < s.length; ++l) {
        const double v = src[static_cast<std::size_t>((o * s.length + l) * s.inner + i)];
        if (v > best_value) {
          best_value = v;
          best = l;
        }
      }
      dst[static_cast<std::size_t>(o * s.inner + i)] = best_value;
      result.indices[static_cast<std::size_t>(o * s.inner + i)] = best;
    }
  }
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = result.values.impl().get();
    auto idx = result.indices;
    detail::record({&a}, result.values, [pa, po, s, idx] {
      auto& g = detail::grad_buffer(*pa);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t i = 0; i < s.inner; ++i) {
          const auto k = static_cast<std::size_t>(o * s.inner + i);
          g[static_cast<std::size_t>((o * s.length + idx[k]) * s.inner + i)] += po->grad[k];
        }
      }
    });
  }
  return result;
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor masked_fill(const Tensor& a, const Tensor& keep, double value) {
  if (keep.shape() != a.shape()) {
    throw ShapeError("masked_fill: mask " + to_string(keep.shape()) + " vs " +
                     to_string(a.shape()));
  }
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto k = keep.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = k[i] != 0.0 ? x[i] : value;
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    std::vector<bool> mask(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) mask[i] = k[i] != 0.0;
    detail::record({&a}, out, [pa, po, mask = std::move(mask)] {
      auto& g = detail::grad_buffer(*pa);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (mask[i]) g[i] += po->grad[i];
    });
  }
  return out;
}

Tensor softmax(const Tensor& logits, int axis, const Tensor* keep) {
  const int ax = normalize_axis(axis, logits.rank());
  if (keep != nullptr && keep->shape() != logits.shape()) {
    throw ShapeError("softmax: mask " + to_string(keep->shape()) + " vs logits " +
                     to_string(logits.shape()));
  }
  const AxisSplit s = split_axis(logits.shape(), ax);
  Tensor out(logits.shape());
  auto x = logits.data();
  auto y = out.mutable_data();
  std::vector<double> filled(x.begin(), x.end());
  if (keep != nullptr) {
    auto k = keep->data();
    for (std::size_t i = 0; i < filled.size(); ++i)
      if (k[i] == 0.0) filled[i] = kMaskedLogit;
  }
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      const std::int64_t base = o * s.length * s.inner + i;
      if (keep != nullptr) {
        bool any = false;
        for (std::int64_t l = 0; l < s.length && !any; ++l)
          any = keep->data()[static_cast<std::size_t>(base + l * s.inner)] != 0.0;
        if (!any) {
          throw EmptyNeighborhoodError("softmax slice " + std::to_string(o * s.inner + i) +
                                       " has no unmasked entry");
        }
      }
      double m = filled[static_cast<std::size_t>(base)];
      for (std::int64_t l = 1; l < s.length; ++l)
        m = std::max(m, filled[static_cast<std::size_t>(base + l * s.inner)]);
      double z = 0.0;
      for (std::int64_t l = 0; l < s.length; ++l) {
        const auto idx = static_cast<std::size_t>(base + l * s.inner);
        y[idx] = std::exp(filled[idx] - m);
        z += y[idx];
      }
      for (std::int64_t l = 0; l < s.length; ++l) y[static_cast<std::size_t>(base + l * s.inner)] /= z;
    }
  }
  if (detail::should_record({&logits})) {
    TensorImpl* pa = logits.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&logits}, out, [pa, po, s] {
      auto& g = detail::grad_buffer(*pa);
      const auto& gy = po->grad;
      const auto& yv = po->data;
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t i = 0; i < s.inner; ++i) {
          const std::int64_t base = o * s.length * s.inner + i;
          double dot = 0.0;
          for (std::int64_t l = 0; l < s.length; ++l) {
            const auto idx = static_cast<std::size_t>(base + l * s.inner);
            dot += gy[idx] * yv[idx];
          }
          for (std::int64_t l = 0; l < s.length; ++l) {
            const auto idx = static_cast<std::size_t>(base + l * s.inner);
            g[idx] += yv[idx] * (gy[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor gather_last(const Tensor& a, std::span<const std::int64_t> indices) {
  if (a.rank() < 1) throw ShapeError("gather_last on a scalar");
  const std::int64_t width = a.dim(-1);
  const std::int64_t rows = width == 0 ? 0 : a.size() / width;
  if (static_cast<std::int64_t>(indices.size()) != rows) {
    throw ShapeError("gather_last: " + std::to_string(indices.size()) + " indices for " +
                     std::to_string(rows) + " rows");
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  Tensor out(out_shape);
  auto src = a.data();
  auto dst = out.mutable_data();
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto k = idx[static_cast<std::size_t>(r)];
    if (k < 0 || k >= width) throw ShapeError("gather_last: index out of range");
    dst[static_cast<std::size_t>(r)] = src[static_cast<std::size_t>(r * width + k)];
  }
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&a}, out, [pa, po, idx = std::move(idx), width] {
      auto& g = detail::grad_buffer(*pa);
      for (std::size_t r = 0; r < idx.size(); ++r)
        g[r * static_cast<std::size_t>(width) + static_cast<std::size_t>(idx[r])] += po->grad[r];
    });
  }
  return out;
}

Tensor straight_through(const Tensor& values, const Tensor& gradient_path) {
  if (values.shape() != gradient_path.shape()) {
    throw ShapeError("straight_through: " + to_string(values.shape()) + " vs " +
                     to_string(gradient_path.shape()));
  }
  Tensor out = values.clone();
  if (detail::should_record({&gradient_path})) {
    TensorImpl* pg = gradient_path.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&gradient_path}, out, [pg, po] {
      auto& g = detail::grad_buffer(*pg);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += po->grad[i];
    });
  }
  return out;
}

}  // namespace dagmix::numerics

namespace dagmix::numerics {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  require_rank(b, 1, "linear");
  const auto m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k || b.dim(0) != n) {
    throw ShapeError("linear: " + to_string(x.shape()) + " x " + to_string(w.shape()) + " + " +
                     to_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  Map o(out.mutable_data().data(), m, n);
  o.noalias() = MapC(x.data().data(), m, k) * MapC(w.data().data(), k, n);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), n);
  if (detail::should_record({&x, &w, &b})) {
    TensorImpl* px = x.impl().get();
    TensorImpl* pw = w.impl().get();
    TensorImpl* pb = b.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&x, &w, &b}, out, [px, pw, pb, po, m, k, n] {
      MapC g(po->grad.data(), m, n);
      if (px->requires_grad) {
        Map(detail::grad_buffer(*px).data(), m, k).noalias() +=
            g * MapC(pw->data.data(), k, n).transpose();
      }
      if (pw->requires_grad) {
        Map(detail::grad_buffer(*pw).data(), k, n).noalias() +=
            MapC(px->data.data(), m, k).transpose() * g;
      }
      if (pb->requires_grad) {
        Eigen::Map<Eigen::RowVectorXd>(detail::grad_buffer(*pb).data(), n) += g.colwise().sum();
      }
    });
  }
  return out;
}

namespace {

constexpr std::int64_t kRowTile = 256;

// tanh through the vectorised exp; absolute error stays at rounding level.
template <class Derived>
auto tanh_via_exp(const Eigen::ArrayBase<Derived>& x) {
  return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

template <class Derived>
auto sigmoid_via_exp(const Eigen::ArrayBase<Derived>& x) {
  return 1.0 / (1.0 + (-x).exp());
}

}  // namespace

namespace {

// Where a GRU step reads its input gates from: a dense [B, 3H] tensor, or
// the pairwise sum rows[m, i] + cols[m, j] with B = M * n.
struct GateSource {
  const Tensor* gates = nullptr;
  const Tensor* rows = nullptr;
  const Tensor* cols = nullptr;
  std::int64_t j = 0;
  std::int64_t n = 1;

  // Writes gates for rows [r0, r0 + count) into dst (row-major, width G).
  void fill(double* dst, std::int64_t r0, std::int64_t count, std::int64_t G) const {
    if (gates) {
      std::copy_n(gates->data().data() + r0 * G, count * G, dst);
      return;
    }
    const double* rp = rows->data().data();
    const double* cp = cols->data().data();
    for (std::int64_t k = 0; k < count; ++k) {
      const std::int64_t r = r0 + k;
      const double* q = rp + r * G;
      const double* p = cp + ((r / n) * n + j) * G;
      double* d = dst + k * G;
      for (std::int64_t c = 0; c < G; ++c) d[c] = q[c] + p[c];
    }
  }
};

struct GateGrad {
  TensorImpl* gates = nullptr;
  TensorImpl* rows = nullptr;
  TensorImpl* cols = nullptr;
  std::int64_t j = 0;
  std::int64_t n = 1;

  template <class Block>
  void add(const Block& d, std::int64_t r0, std::int64_t count, std::int64_t G) const {
    if (gates && gates->requires_grad) {
      Map(detail::grad_buffer(*gates).data() + r0 * G, count, G) += d;
    }
    if (rows && rows->requires_grad) {
      Map(detail::grad_buffer(*rows).data() + r0 * G, count, G) += d;
    }
    if (cols && cols->requires_grad) {
      double* gc = detail::grad_buffer(*cols).data();
      for (std::int64_t k = 0; k < count; ++k) {
        const std::int64_t r = r0 + k;
        Eigen::Map<Eigen::RowVectorXd>(gc + ((r / n) * n + j) * G, G) += d.row(k);
      }
    }
  }
};

Tensor gru_step_impl(const GateSource& src, const Tensor& h, const Tensor& w_hidden,
                     const Tensor& b_hidden, const std::vector<const Tensor*>& inputs) {
  const auto B = h.dim(0), H = h.dim(1);
  // Per row: [r | z | h W_hn + b_hn | n].
  auto saved = std::make_shared<Buffer>(static_cast<std::size_t>(B * 4 * H));
  Tensor out(Shape{B, H});
  {
    MapC w(w_hidden.data().data(), H, 3 * H);
    const Eigen::Map<const Eigen::RowVectorXd> bias(b_hidden.data().data(), 3 * H);
    RowMajor xi_tile(std::min(kRowTile, B), 3 * H);
    for (std::int64_t r0 = 0; r0 < B; r0 += kRowTile) {
      const std::int64_t rows = std::min(kRowTile, B - r0);
      src.fill(xi_tile.data(), r0, rows, 3 * H);
      const auto xi = xi_tile.topRows(rows);
      MapC hp(h.data().data() + r0 * H, rows, H);
      Eigen::Map<RowMajor, 0, Eigen::OuterStride<>> sv(saved->data() + r0 * 4 * H, rows, 3 * H,
                                                       Eigen::OuterStride<>(4 * H));
      Eigen::Map<RowMajor, 0, Eigen::OuterStride<>> cand(saved->data() + r0 * 4 * H + 3 * H, rows,
                                                         H, Eigen::OuterStride<>(4 * H));
      sv.noalias() = hp * w;
      sv.rowwise() += bias;
      sv.leftCols(2 * H).array() =
          sigmoid_via_exp(xi.leftCols(2 * H).array() + sv.leftCols(2 * H).array());
      cand.array() =
          tanh_via_exp(xi.rightCols(H).array() + sv.leftCols(H).array() * sv.rightCols(H).array());
      Map(out.mutable_data().data() + r0 * H, rows, H).array() =
          cand.array() + sv.middleCols(H, H).array() * (hp.array() - cand.array());
    }
  }
  if (detail::should_record_any(inputs)) {
    GateGrad gg;
    if (src.gates) gg.gates = src.gates->impl().get();
    if (src.rows) gg.rows = src.rows->impl().get();
    if (src.cols) gg.cols = src.cols->impl().get();
    gg.j = src.j;
    gg.n = src.n;
    TensorImpl* ph = h.impl().get();
    TensorImpl* pw = w_hidden.impl().get();
    TensorImpl* pb = b_hidden.impl().get();
    TensorImpl* po = out.impl().get();
    std::vector<Tensor> held;
    for (const Tensor* t : inputs) held.push_back(*t);
    detail::record(held, out, [gg, ph, pw, pb, po, saved, B, H] {
      MapC w(pw->data.data(), H, 3 * H);
      RowMajor gw = RowMajor::Zero(H, 3 * H);
      Eigen::RowVectorXd gb = Eigen::RowVectorXd::Zero(3 * H);
      RowMajor dhg(std::min(kRowTile, B), 3 * H);
      RowMajor din(std::min(kRowTile, B), 3 * H);
      for (std::int64_t r0 = 0; r0 < B; r0 += kRowTile) {
        const std::int64_t rows = std::min(kRowTile, B - r0);
        MapC g(po->grad.data() + r0 * H, rows, H);
        Eigen::Map<const RowMajor, 0, Eigen::OuterStride<>> sv(
            saved->data() + r0 * 4 * H, rows, 4 * H, Eigen::OuterStride<>(4 * H));
        MapC hp(ph->data.data() + r0 * H, rows, H);
        const auto r = sv.leftCols(H).array();
        const auto z = sv.middleCols(H, H).array();
        const auto hn = sv.middleCols(2 * H, H).array();
        const auto n = sv.rightCols(H).array();
        auto dg = dhg.topRows(rows);
        auto di = din.topRows(rows);
        di.rightCols(H).array() = g.array() * (1.0 - z) * (1.0 - n.square());
        dg.leftCols(H).array() = di.rightCols(H).array() * hn * r * (1.0 - r);
        dg.middleCols(H, H).array() = g.array() * (hp.array() - n) * z * (1.0 - z);
        dg.rightCols(H).array() = di.rightCols(H).array() * r;
        di.leftCols(2 * H) = dg.leftCols(2 * H);
        gg.add(di, r0, rows, 3 * H);
        if (ph->requires_grad) {
          Map gh(detail::grad_buffer(*ph).data() + r0 * H, rows, H);
          gh.noalias() += dg * w.transpose();
          gh.array() += g.array() * z;
        }
        if (pw->requires_grad) gw.noalias() += hp.transpose() * dg;
        if (pb->requires_grad) gb += dg.colwise().sum();
      }
      if (pw->requires_grad) Map(detail::grad_buffer(*pw).data(), H, 3 * H) += gw;
      if (pb->requires_grad) {
        Eigen::Map<Eigen::RowVectorXd>(detail::grad_buffer(*pb).data(), 3 * H) += gb;
      }
    });
  }
  return out;
}

void check_gru_shapes(std::int64_t gate_rows, std::int64_t gate_width, const Tensor& h,
                      const Tensor& w_hidden, const Tensor& b_hidden, const char* op) {
  require_rank(h, 2, op);
  const auto B = h.dim(0), H = h.dim(1);
  if (gate_rows != B || gate_width != 3 * H || w_hidden.rank() != 2 || w_hidden.dim(0) != H ||
      w_hidden.dim(1) != 3 * H || b_hidden.rank() != 1 || b_hidden.dim(0) != 3 * H) {
    throw ShapeError(std::string(op) + ": hidden " + to_string(h.shape()) + ", w_hidden " +
                     to_string(w_hidden.shape()) + ", gate rows " + std::to_string(gate_rows) +
                     " x " + std::to_string(gate_width));
  }
}

}  // namespace

Tensor gru_cell(const Tensor& input_gates, const Tensor& h, const Tensor& w_hidden,
                const Tensor& b_hidden) {
  require_rank(input_gates, 2, "gru_cell");
  check_gru_shapes(input_gates.dim(0), input_gates.dim(1), h, w_hidden, b_hidden, "gru_cell");
  GateSource src;
  src.gates = &input_gates;
  return gru_step_impl(src, h, w_hidden, b_hidden, {&input_gates, &h, &w_hidden, &b_hidden});
}

Tensor gru_cell_pair(const Tensor& rows, const Tensor& cols, std::int64_t j, const Tensor& h,
                     const Tensor& w_hidden, const Tensor& b_hidden) {
  require_rank(rows, 3, "gru_cell_pair");
  if (rows.shape() != cols.shape()) {
    throw ShapeError("gru_cell_pair: " + to_string(rows.shape()) + " vs " +
                     to_string(cols.shape()));
  }
  const auto M = rows.dim(0), n = rows.dim(1);
  if (j < 0 || j >= n) throw ShapeError("gru_cell_pair: position out of range");
  check_gru_shapes(M * n, rows.dim(2), h, w_hidden, b_hidden, "gru_cell_pair");
  GateSource src;
  src.rows = &rows;
  src.cols = &cols;
  src.j = j;
  src.n = n;
  return gru_step_impl(src, h, w_hidden, b_hidden, {&rows, &cols, &h, &w_hidden, &b_hidden});
}

Tensor pair_sum(const Tensor& rows, const Tensor& cols, std::int64_t j) {
  require_rank(rows, 3, "pair_sum");
  if (rows.shape() != cols.shape()) {
    throw ShapeError("pair_sum: " + to_string(rows.shape()) + " vs " + to_string(cols.shape()));
  }
  const auto M = rows.dim(0), n = rows.dim(1), G = rows.dim(2);
  if (j < 0 || j >= n) throw ShapeError("pair_sum: position out of range");
  Tensor out(Shape{M * n, G});
  {
    auto o = out.mutable_data();
    const double* rp = rows.data().data();
    const double* cp = cols.data().data();
    for (std::int64_t m = 0; m < M; ++m) {
      const double* partner = cp + (m * n + j) * G;
      for (std::int64_t i = 0; i < n; ++i) {
        const double* q = rp + (m * n + i) * G;
        double* dst = o.data() + (m * n + i) * G;
        for (std::int64_t c = 0; c < G; ++c) dst[c] = q[c] + partner[c];
      }
    }
  }
  if (detail::should_record({&rows, &cols})) {
    TensorImpl* pr = rows.impl().get();
    TensorImpl* pc = cols.impl().get();
    TensorImpl* po = out.impl().get();
    detail::record({&rows, &cols}, out, [pr, pc, po, M, n, G, j] {
      const double* g = po->grad.data();
      if (pr->requires_grad) {
        auto& gr = detail::grad_buffer(*pr);
        for (std::size_t k = 0; k < gr.size(); ++k) gr[k] += g[k];
      }
      if (pc->requires_grad) {
        auto& gc = detail::grad_buffer(*pc);
        for (std::int64_t m = 0; m < M; ++m) {
          double* dst = gc.data() + (m * n + j) * G;
          for (std::int64_t i = 0; i < n; ++i) {
            const double* src = g + (m * n + i) * G;
            for (std::int64_t c = 0; c < G; ++c) dst[c] += src[c];
          }
        }
      }
    });
  }
  return out;
}

}  // namespace dagmix::numerics

namespace dagmix::numerics {

Tensor take_rows(const Tensor& a, std::span<const std::int64_t> indices) {
  if (a.rank() < 1) throw ShapeError("take_rows: scalar input");
  const std::int64_t len = a.dim(0);
  const std::int64_t width = len == 0 ? 0 : a.size() / len;
  Shape shape = a.shape();
  shape[0] = static_cast<std::int64_t>(indices.size());
  for (auto i : indices) {
    if (i < 0 || i >= len) {
      throw ShapeError("take_rows: index " + std::to_string(i) + " out of range for " +
                       to_string(a.shape()));
    }
  }
  Tensor out(shape);
  {
    auto o = out.mutable_data();
    const double* src = a.data().data();
    for (std::size_t k = 0; k < indices.size(); ++k) {
      std::copy_n(src + indices[k] * width, width, o.data() + static_cast<std::int64_t>(k) * width);
    }
  }
  if (detail::should_record({&a})) {
    TensorImpl* pa = a.impl().get();
    TensorImpl* po = out.impl().get();
    std::vector<std::int64_t> idx(indices.begin(), indices.end());
    detail::record({&a}, out, [pa, po, idx = std::move(idx), width] {
      auto& g = detail::grad_buffer(*pa);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double* src = po->grad.data() + static_cast<std::int64_t>(k) * width;
        double* dst = g.data() + idx[k] * width;
        for (std::int64_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

}  // namespace dagmix::numerics
