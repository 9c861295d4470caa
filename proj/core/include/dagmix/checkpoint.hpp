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
#include <map>
#include <string>
#include <vector>

#include "dagmix/numerics/params.hpp"

namespace dagmix {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout (little endian):
//   "DAGMIXCK" | u32 version | u64 config hash | u64 meta bytes | meta text
//   | u64 tensor count | per tensor: u32 name bytes, name, u32 rank,
//   rank x i64 dims, numel x f64 | u64 FNV-1a of everything before it.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  // Free-form key -> value metadata (counters, rng states, config echo).
  std::map<std::string, std::string> meta;
  numerics::ParamList tensors;

  const numerics::Tensor& tensor(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError naming the byte offset where decoding failed.
Checkpoint decode_checkpoint(const std::string& bytes);

// Written to <path>.tmp then renamed.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copies every tensor named prefix + p.name into p.
void restore_params(const Checkpoint& ckpt, const std::string& prefix,
                    const numerics::ParamList& params);
void store_params(Checkpoint& ckpt, const std::string& prefix, const numerics::ParamList& params);

}  // namespace dagmix
