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
#include <optional>
#include <string>
#include <vector>

#include "dagmix/checkpoint.hpp"
#include "dagmix/config.hpp"
#include "dagmix/training.hpp"

namespace dagmix {

// One evaluation row of metrics.jsonl. Optional fields serialise as null.
struct MetricsRow {
  std::int64_t env_steps = 0;
  double mean_return = 0.0;
  std::optional<double> success_rate;
  std::optional<double> loss;  // mean train loss since the previous row
  double epsilon = 0.0;
  std::optional<double> adjacency_sparsity;
  std::optional<std::vector<double>> attention_entropy;  // per agent
  std::optional<double> wallclock_s;

  bool operator==(const MetricsRow&) const = default;
};

std::string to_json_line(const MetricsRow& row);
MetricsRow parse_metrics_line(const std::string& line);
std::vector<MetricsRow> read_metrics_file(const std::string& path);

inline constexpr const char* kMetricsFile = "metrics.jsonl";
inline constexpr const char* kResolvedConfigFile = "config.resolved";
inline constexpr const char* kFinalCheckpoint = "checkpoint_final.ckpt";
std::string checkpoint_name(std::int64_t env_steps);

struct RunOptions {
  // Checkpoint to continue from; its config hash must match.
  std::string resume_from;
  // false: nothing is written to disk (tests).
  bool write_files = true;
  std::function<void(const MetricsRow&)> on_row;
};

struct RunResult {
  std::string out_dir;
  std::vector<MetricsRow> rows;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::int64_t train_steps = 0;
  std::optional<training::Model> model;
};

// collect -> train -> maybe sync / eval / checkpoint, until total_env_steps.
RunResult run_training(const RunConfig& config, const RunOptions& options = {});

Checkpoint make_run_checkpoint(const RunConfig& config, const training::Learner& learner,
                               const std::map<std::string, std::string>& counters);

// Rebuilds the online model stored in a checkpoint. The environment is made
// from the checkpoint's own config.
struct LoadedModel {
  RunConfig config;
  training::Model model;
};
LoadedModel load_model(const Checkpoint& ckpt);

struct EvalReport {
  training::EvalSummary summary;
  RunConfig config;
};

// Greedy evaluation of a saved model. If `expected` is given, its
// architecture hash must match the checkpoint.
EvalReport evaluate_checkpoint(const std::string& path, std::int64_t episodes, std::uint64_t seed,
                               const RunConfig* expected = nullptr);

}  // namespace dagmix
