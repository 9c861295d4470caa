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

#include "dagmix/numerics/rmsprop.hpp"

#include <cmath>
#include <sstream>

#include "dagmix/errors.hpp"

namespace dagmix::numerics {

RmsProp::RmsProp(std::vector<Tensor> params, RmsPropOptions options)
    : params_(std::move(params)), options_(options) {
  accumulators_.reserve(params_.size());
  for (const auto& p : params_) accumulators_.emplace_back(p.shape());
}

double global_grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double RmsProp::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto g = params_[k].grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::isnan(g[i])) {
        std::ostringstream os;
        os << "divergence: NaN gradient in parameter " << k << " entry " << i;
        throw DivergenceError(os.str());
      }
    }
  }
  const double norm = global_grad_norm(params_);
  if (!std::isfinite(norm)) throw DivergenceError("divergence: gradient norm is not finite");
  const double factor = (options_.grad_norm_clip > 0.0 && norm > options_.grad_norm_clip)
                            ? options_.grad_norm_clip / norm
                            : 1.0;
  const double a = options_.alpha;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto acc = accumulators_[k].mutable_data();
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i] * factor;
      acc[i] = a * acc[i] + (1.0 - a) * gi * gi;
      w[i] -= options_.learning_rate * gi / (std::sqrt(acc[i]) + options_.epsilon);
    }
  }
  return norm;
}

void RmsProp::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace dagmix::numerics
