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

#include <vector>

#include "dagmix/numerics/tensor.hpp"

namespace dagmix::numerics {

struct RmsPropOptions {
  double learning_rate = 5e-4;
  double alpha = 0.99;
  double epsilon = 1e-5;
  // Global L2 norm cap; <= 0 disables clipping.
  double grad_norm_clip = 10.0;
};

// RMSProp over a fixed parameter list:
//   acc <- alpha * acc + (1 - alpha) * g^2
//   p   <- p - lr * g / (sqrt(acc) + eps)
// after scaling every gradient by clip / norm when the global norm exceeds
// the clip.
class RmsProp {
 public:
  RmsProp(std::vector<Tensor> params, RmsPropOptions options = {});

  // Returns the global gradient norm measured before clipping. Throws
  // DivergenceError if any gradient entry is NaN; parameters are left
  // untouched in that case.
  double step();
  void zero_grad();

  const RmsPropOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const std::vector<Tensor>& params() const { return params_; }
  // Squared-gradient accumulators, shape-matched to params().
  const std::vector<Tensor>& accumulators() const { return accumulators_; }
  std::vector<Tensor>& mutable_accumulators() { return accumulators_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> accumulators_;
  RmsPropOptions options_;
};

double global_grad_norm(const std::vector<Tensor>& params);

}  // namespace dagmix::numerics
