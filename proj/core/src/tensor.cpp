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

#include "dagmix/numerics/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "dagmix/errors.hpp"

namespace dagmix::numerics {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int normalize_axis(int axis, int rank) {
  int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return a;
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + to_string(shape));
  }
  impl_->data.assign(static_cast<std::size_t>(numel(shape)), 0.0);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (static_cast<std::int64_t>(values.size()) != numel(shape)) {
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + to_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data.assign(values.begin(), values.end());
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }
int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }
std::int64_t Tensor::dim(int axis) const {
  return impl_->shape[static_cast<std::size_t>(normalize_axis(axis, rank()))];
}
std::int64_t Tensor::size() const {
  return static_cast<std::int64_t>(impl_->data.size());
}

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (impl_->data.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(impl_->shape));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }
std::span<double> Tensor::mutable_grad() { return detail::grad_buffer(*impl_); }
void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  Tensor out;
  out.impl_ = std::make_shared<TensorImpl>();
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;
  return out;
}

void Tensor::copy_from(const Tensor& other) {
  if (other.shape() != shape()) {
    throw ShapeError("copy_from: shape " + to_string(other.shape()) + " into " +
                     to_string(shape()));
  }
  std::copy(other.impl_->data.begin(), other.impl_->data.end(),
            impl_->data.begin());
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }
Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = previous_;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs,
                  std::shared_ptr<TensorImpl> output, BackwardFn backward) {
  entries_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : "undefined"));
  }
  if (entries_.empty()) throw Error("backward() on an empty tape");
  auto& seed = detail::grad_buffer(*loss.impl());
  seed[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from the loss
    it->backward();
  }
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw Error("backward() without an active tape");
  tape->backward(loss);
}

namespace detail {

Buffer& grad_buffer(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

bool should_record_any(const std::vector<const Tensor*>& inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

void record(std::initializer_list<const Tensor*> inputs, const Tensor& output,
            Tape::BackwardFn backward) {
  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(inputs.size());
  for (const Tensor* t : inputs) impls.push_back(t->impl());
  output.impl()->requires_grad = true;
  g_active_tape->record(std::move(impls), output.impl(), std::move(backward));
}

void record(const std::vector<Tensor>& inputs, const Tensor& output,
            Tape::BackwardFn backward) {
  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(inputs.size());
  for (const Tensor& t : inputs) impls.push_back(t.impl());
  output.impl()->requires_grad = true;
  g_active_tape->record(std::move(impls), output.impl(), std::move(backward));
}

}  // namespace detail
}  // namespace dagmix::numerics
