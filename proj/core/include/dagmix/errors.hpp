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

#include <stdexcept>
#include <string>

namespace dagmix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes, parameter arities or widths that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid or unknown configuration keys / values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN gradients or losses. Aborts a training run.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A softmax slice with every entry masked out.
class EmptyNeighborhoodError : public Error {
 public:
  EmptyNeighborhoodError() : Error("empty neighborhood") {}
  explicit EmptyNeighborhoodError(const std::string& detail)
      : Error("empty neighborhood: " + detail) {}
};

class EnvError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace dagmix
