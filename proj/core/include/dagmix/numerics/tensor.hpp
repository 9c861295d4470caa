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

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace dagmix::numerics {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Cache-line aligned so vectorised reductions see the same alignment, and so
// sum in the same order, on every run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct TensorImpl {
  Shape shape;
  Buffer data;
  // Empty until a gradient is first accumulated.
  Buffer grad;
  bool requires_grad = false;
};

// Dense row-major float64 array. A Tensor is a cheap handle: copies share
// storage, use clone() for an independent buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value);
  static Tensor filled(Shape shape, double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  // Negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  // Allocates a zero gradient buffer on first use.
  std::span<double> mutable_grad();
  void zero_grad();

  // Independent copy of the values, detached from any tape.
  Tensor clone() const;
  Tensor detach() const { return clone(); }
  void copy_from(const Tensor& other);

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

int normalize_axis(int axis, int rank);

// Ordered record of differentiable operations. Constructing a Tape makes it
// the active tape for the current thread until it is destroyed; operations
// executed while no tape is active are not recorded.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::vector<std::shared_ptr<TensorImpl>> inputs,
              std::shared_ptr<TensorImpl> output, BackwardFn backward);
  std::size_t size() const { return entries_.size(); }

  // Seeds d(loss)/d(loss) = 1 and visits every entry once, newest first.
  void backward(const Tensor& loss);

 private:
  struct Entry {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  Tape* previous_ = nullptr;
};

// Suspends recording on the current thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

void backward(const Tensor& loss);

namespace detail {
// Zero-initialised gradient buffer of `t`, allocated on demand.
Buffer& grad_buffer(TensorImpl& t);
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record_any(const std::vector<const Tensor*>& inputs);
void record(std::initializer_list<const Tensor*> inputs, const Tensor& output,
            Tape::BackwardFn backward);
void record(const std::vector<Tensor>& inputs, const Tensor& output,
            Tape::BackwardFn backward);
}  // namespace detail

}  // namespace dagmix::numerics
