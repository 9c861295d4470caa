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

#include "dagmix/graphgen.hpp"
#include "dagmix/mixers.hpp"

namespace dagmix {

// Every tunable of a run. Text form is one `key = value` per line; `#` starts
// a comment. Unknown keys are rejected.
struct RunConfig {
  mixers::MixerKind algo = mixers::MixerKind::kDagmix;
  std::string env = "matrix";
  std::uint64_t seed = 0;
  std::int64_t total_env_steps = 200000;
  std::string out;  // empty: <output root>/<algo>_<env>_seed<seed>

  // training
  double gamma = 0.99;
  std::int64_t batch_size = 32;
  std::int64_t buffer_capacity = 5000;
  std::int64_t target_update_interval = 200;  // train steps
  std::int64_t episodes_per_train = 1;
  std::int64_t eval_interval = 2000;          // env steps
  std::int64_t eval_episodes = 32;
  std::int64_t checkpoint_interval = 50000;   // env steps

  // optimiser
  double learning_rate = 5e-4;
  double rms_alpha = 0.99;
  double rms_epsilon = 1e-5;
  double grad_norm_clip = 10.0;

  // exploration
  double epsilon_start = 1.0;
  double epsilon_finish = 0.05;
  std::int64_t epsilon_anneal_steps = 50000;

  // networks
  std::int64_t agent_hidden = 64;
  std::int64_t graph_embed_dim = 32;
  std::int64_t graph_hidden = 32;
  double gumbel_tau = 0.5;
  double gumbel_lambda = 1.0;
  graphgen::NoiseMode noise_mode = graphgen::NoiseMode::kStandardGumbel;
  std::int64_t mixer_embed_dim = 32;
  std::int64_t attention_dim = 32;
  std::int64_t hypernet_hidden = 64;
  std::int64_t mixing_layers = 1;  // 2 = QMIX-classic two-stage mixing
  std::int64_t two_stage_embed = 32;

  // scenario overrides, 0 = scenario default
  std::int64_t grid_size = 0;
  std::int64_t n_agents = 0;
  std::int64_t obs_radius = 0;
  std::int64_t episode_limit = 0;

  bool log_wallclock = false;

  bool operator==(const RunConfig&) const = default;
};

// Ordered key list, as echoed.
const std::vector<std::string>& config_keys();

void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

// Parses `key = value` lines on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});
// Splits "key=value"; throws ConfigError when there is no '='.
std::pair<std::string, std::string> split_assignment(const std::string& text);

// Throws ConfigError on out-of-range values.
void validate(const RunConfig& config);

// Canonical text: every key in config_keys() order.
std::string to_text(const RunConfig& config);

// Hash of the keys that fix parameter shapes and the environment; checkpoints
// refuse to load under a different value.
std::uint64_t architecture_hash(const RunConfig& config);

// $DAGMIX_OUT if set, else "runs".
std::string default_output_root();
std::string resolve_output_dir(const RunConfig& config);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace dagmix
