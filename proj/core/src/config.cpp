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

#include "dagmix/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "dagmix/envs.hpp"
#include "dagmix/errors.hpp"

namespace dagmix {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if (!value.empty() && value.front() == '+') ++first;
  auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <class T>
Field int_field(T RunConfig::*member) {
  return {[member](const RunConfig& c) { return std::to_string(c.*member); },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          }};
}

Field double_field(double RunConfig::*member) {
  return {[member](const RunConfig& c) { return format_double(c.*member); },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<double>(k, v);
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"algo",
       {[](const RunConfig& c) { return mixers::to_string(c.algo); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.algo = mixers::parse_mixer_kind(v);
        }}},
      {"env",
       {[](const RunConfig& c) { return c.env; },
        [](RunConfig& c, const std::string&, const std::string& v) {
          const auto& names = envs::scenario_names();
          if (std::find(names.begin(), names.end(), v) == names.end()) {
            throw ConfigError("unknown env '" + v +
                              "'; valid envs: matrix, spread5, spread8, spread25, spread27");
          }
          c.env = v;
        }}},
      {"seed", int_field(&RunConfig::seed)},
      {"total_env_steps", int_field(&RunConfig::total_env_steps)},
      {"out",
       {[](const RunConfig& c) { return c.out; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }}},
      {"gamma", double_field(&RunConfig::gamma)},
      {"batch_size", int_field(&RunConfig::batch_size)},
      {"buffer_capacity", int_field(&RunConfig::buffer_capacity)},
      {"target_update_interval", int_field(&RunConfig::target_update_interval)},
      {"episodes_per_train", int_field(&RunConfig::episodes_per_train)},
      {"eval_interval", int_field(&RunConfig::eval_interval)},
      {"eval_episodes", int_field(&RunConfig::eval_episodes)},
      {"checkpoint_interval", int_field(&RunConfig::checkpoint_interval)},
      {"learning_rate", double_field(&RunConfig::learning_rate)},
      {"rms_alpha", double_field(&RunConfig::rms_alpha)},
      {"rms_epsilon", double_field(&RunConfig::rms_epsilon)},
      {"grad_norm_clip", double_field(&RunConfig::grad_norm_clip)},
      {"epsilon_start", double_field(&RunConfig::epsilon_start)},
      {"epsilon_finish", double_field(&RunConfig::epsilon_finish)},
      {"epsilon_anneal_steps", int_field(&RunConfig::epsilon_anneal_steps)},
      {"agent_hidden", int_field(&RunConfig::agent_hidden)},
      {"graph_embed_dim", int_field(&RunConfig::graph_embed_dim)},
      {"graph_hidden", int_field(&RunConfig::graph_hidden)},
      {"gumbel_tau", double_field(&RunConfig::gumbel_tau)},
      {"gumbel_lambda", double_field(&RunConfig::gumbel_lambda)},
      {"noise_mode",
       {[](const RunConfig& c) { return graphgen::to_string(c.noise_mode); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.noise_mode = graphgen::parse_noise_mode(v);
        }}},
      {"mixer_embed_dim", int_field(&RunConfig::mixer_embed_dim)},
      {"attention_dim", int_field(&RunConfig::attention_dim)},
      {"hypernet_hidden", int_field(&RunConfig::hypernet_hidden)},
      {"mixing_layers", int_field(&RunConfig::mixing_layers)},
      {"two_stage_embed", int_field(&RunConfig::two_stage_embed)},
      {"grid_size", int_field(&RunConfig::grid_size)},
      {"n_agents", int_field(&RunConfig::n_agents)},
      {"obs_radius", int_field(&RunConfig::obs_radius)},
      {"episode_limit", int_field(&RunConfig::episode_limit)},
      {"log_wallclock",
       {[](const RunConfig& c) { return std::string(c.log_wallclock ? "true" : "false"); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.log_wallclock = parse_bool(k, v);
        }}},
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return field;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  find_field(key).set(config, key, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  return find_field(key).get(config);
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + text + "'");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      auto [key, value] = split_assignment(line);
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.gamma >= 0.0 && c.gamma < 1.0, "gamma must lie in [0, 1)");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.buffer_capacity >= c.batch_size, "batch_size must not exceed buffer_capacity");
  require(c.total_env_steps >= 0, "total_env_steps must be >= 0");
  require(c.target_update_interval >= 1, "target_update_interval must be >= 1");
  require(c.episodes_per_train >= 1, "episodes_per_train must be >= 1");
  require(c.eval_interval >= 1, "eval_interval must be >= 1");
  require(c.eval_episodes >= 0, "eval_episodes must be >= 0");
  require(c.checkpoint_interval >= 1, "checkpoint_interval must be >= 1");
  require(c.learning_rate >= 0.0, "learning_rate must be >= 0");
  require(c.rms_alpha >= 0.0 && c.rms_alpha < 1.0, "rms_alpha must lie in [0, 1)");
  require(c.rms_epsilon > 0.0, "rms_epsilon must be > 0");
  require(c.epsilon_start >= 0.0 && c.epsilon_start <= 1.0, "epsilon_start must lie in [0, 1]");
  require(c.epsilon_finish >= 0.0 && c.epsilon_finish <= 1.0,
          "epsilon_finish must lie in [0, 1]");
  require(c.epsilon_anneal_steps >= 0, "epsilon_anneal_steps must be >= 0");
  require(c.agent_hidden >= 1 && c.graph_embed_dim >= 1 && c.graph_hidden >= 1 &&
              c.mixer_embed_dim >= 1 && c.attention_dim >= 1 && c.hypernet_hidden >= 1 &&
              c.two_stage_embed >= 1,
          "network widths must be >= 1");
  require(c.gumbel_tau > 0.0, "gumbel_tau must be > 0");
  require(c.gumbel_lambda > 0.0, "gumbel_lambda must be > 0");
  require(c.mixing_layers == 1 || c.mixing_layers == 2, "mixing_layers must be 1 or 2");
  require(c.grid_size >= 0 && c.n_agents >= 0 && c.obs_radius >= 0 && c.episode_limit >= 0,
          "scenario overrides must be >= 0");
  if (c.env == "matrix") {
    require(c.grid_size == 0 && c.n_agents == 0 && c.obs_radius == 0 && c.episode_limit == 0,
            "scenario overrides do not apply to the matrix game");
  }
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) {
    out += name + " = " + field.get(config) + "\n";
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t architecture_hash(const RunConfig& config) {
  static const char* keys[] = {"algo",          "env",             "agent_hidden",
                               "graph_embed_dim", "graph_hidden",  "mixer_embed_dim",
                               "attention_dim", "hypernet_hidden", "mixing_layers",
                               "two_stage_embed", "grid_size",     "n_agents",
                               "obs_radius",    "episode_limit"};
  std::string text;
  for (const char* k : keys) text += std::string(k) + "=" + get_config_value(config, k) + ";";
  return fnv1a(text);
}

std::string default_output_root() {
  const char* env = std::getenv("DAGMIX_OUT");
  return (env != nullptr && *env != '\0') ? std::string(env) : std::string("runs");
}

std::string resolve_output_dir(const RunConfig& config) {
  if (!config.out.empty()) return config.out;
  return default_output_root() + "/" + mixers::to_string(config.algo) + "_" + config.env + "_seed" +
         std::to_string(config.seed);
}

}  // namespace dagmix
