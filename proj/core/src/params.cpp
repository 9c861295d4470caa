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

#include "dagmix/numerics/params.hpp"

#include "dagmix/errors.hpp"

namespace dagmix::numerics {

void copy_values(const ParamList& dst, const ParamList& src) {
  if (dst.size() != src.size()) {
    throw ShapeError("copy_values: " + std::to_string(src.size()) + " tensors into " +
                     std::to_string(dst.size()));
  }
  for (std::size_t k = 0; k < dst.size(); ++k) {
    if (dst[k].name != src[k].name) {
      throw ShapeError("copy_values: parameter order mismatch at " + dst[k].name);
    }
    Tensor target = dst[k].tensor;
    target.copy_from(src[k].tensor);
  }
}

}  // namespace dagmix::numerics
