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

#include "dagmix/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "dagmix/errors.hpp"
#include "dagmix/numerics/params.hpp"

namespace dagmix {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

envs::EnvOverrides overrides_of(const RunConfig& c) {
  return {static_cast<int>(c.grid_size), static_cast<int>(c.n_agents),
          static_cast<int>(c.obs_radius), static_cast<int>(c.episode_limit)};
}

std::string rng_text(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void rng_from_text(Rng& rng, const std::string& text) {
  std::istringstream ss(text);
  ss >> rng;
  if (!ss) throw CheckpointError("checkpoint rng state does not parse");
}

std::int64_t to_int(const std::string& s) {
  try {
    return std::stoll(s);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint counter '" + s + "' is not an integer");
  }
}

// Accumulates per-train-step diagnostics between two metrics rows.
struct Pending {
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  double sparsity_sum = 0.0;
  std::int64_t sparsity_count = 0;
  std::vector<double> entropy_sum;
  std::int64_t entropy_count = 0;

  void add(const training::TrainStepResult& r) {
    loss_sum += r.loss;
    ++loss_count;
    if (r.adjacency_sparsity) {
      sparsity_sum += *r.adjacency_sparsity;
      ++sparsity_count;
    }
    if (!r.attention_entropy.empty()) {
      if (entropy_sum.empty()) entropy_sum.assign(r.attention_entropy.size(), 0.0);
      for (std::size_t a = 0; a < entropy_sum.size(); ++a) entropy_sum[a] += r.attention_entropy[a];
      ++entropy_count;
    }
  }

  void fill(MetricsRow& row) const {
    if (loss_count > 0) row.loss = loss_sum / static_cast<double>(loss_count);
    if (sparsity_count > 0) row.adjacency_sparsity = sparsity_sum / static_cast<double>(sparsity_count);
    if (entropy_count > 0) {
      std::vector<double> e = entropy_sum;
      for (double& v : e) v /= static_cast<double>(entropy_count);
      row.attention_entropy = e;
    }
  }

  std::string encode() const {
    json j{{"loss_sum", loss_sum},         {"loss_count", loss_count},
           {"sparsity_sum", sparsity_sum}, {"sparsity_count", sparsity_count},
           {"entropy_sum", entropy_sum},   {"entropy_count", entropy_count}};
    return j.dump();
  }

  static Pending decode(const std::string& text) {
    Pending p;
    try {
      json j = json::parse(text);
      p.loss_sum = j.at("loss_sum").get<double>();
      p.loss_count = j.at("loss_count").get<std::int64_t>();
      p.sparsity_sum = j.at("sparsity_sum").get<double>();
      p.sparsity_count = j.at("sparsity_count").get<std::int64_t>();
      p.entropy_sum = j.at("entropy_sum").get<std::vector<double>>();
      p.entropy_count = j.at("entropy_count").get<std::int64_t>();
    } catch (const json::exception& e) {
      throw CheckpointError(std::string("checkpoint pending metrics malformed: ") + e.what());
    }
    return p;
  }
};

}  // namespace

std::string to_json_line(const MetricsRow& row) {
  json j;
  j["env_steps"] = row.env_steps;
  j["mean_return"] = row.mean_return;
  j["success_rate"] = optional_json(row.success_rate);
  j["loss"] = optional_json(row.loss);
  j["epsilon"] = row.epsilon;
  j["adjacency_sparsity"] = optional_json(row.adjacency_sparsity);
  j["attention_entropy"] = row.attention_entropy ? json(*row.attention_entropy) : json(nullptr);
  j["wallclock_s"] = optional_json(row.wallclock_s);
  return j.dump();
}

MetricsRow parse_metrics_line(const std::string& line) {
  MetricsRow row;
  try {
    json j = json::parse(line);
    row.env_steps = j.at("env_steps").get<std::int64_t>();
    row.mean_return = j.at("mean_return").get<double>();
    row.success_rate = optional_double(j, "success_rate");
    row.loss = optional_double(j, "loss");
    row.epsilon = j.at("epsilon").get<double>();
    row.adjacency_sparsity = optional_double(j, "adjacency_sparsity");
    if (j.contains("attention_entropy") && !j.at("attention_entropy").is_null()) {
      row.attention_entropy = j.at("attention_entropy").get<std::vector<double>>();
    }
    row.wallclock_s = optional_double(j, "wallclock_s");
  } catch (const json::exception& e) {
    throw Error(std::string("malformed metrics row: ") + e.what());
  }
  return row;
}

std::vector<MetricsRow> read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metrics file " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(parse_metrics_line(line));
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::string checkpoint_name(std::int64_t env_steps) {
  return "checkpoint_" + std::to_string(env_steps) + ".ckpt";
}

Checkpoint make_run_checkpoint(const RunConfig& config, const training::Learner& learner,
                               const std::map<std::string, std::string>& counters) {
  Checkpoint ckpt;
  ckpt.config_hash = architecture_hash(config);
  ckpt.meta = counters;
  ckpt.meta["config"] = to_text(config);
  store_params(ckpt, "online.", learner.online().params());
  store_params(ckpt, "target.", learner.target().params());
  const auto online = learner.online().params();
  const auto& acc = learner.optimizer().accumulators();
  for (std::size_t k = 0; k < online.size(); ++k) {
    ckpt.tensors.push_back({"optim.sq." + online[k].name, acc[k].clone()});
  }
  return ckpt;
}

LoadedModel load_model(const Checkpoint& ckpt) {
  RunConfig config = parse_config(ckpt.meta_value("config"));
  if (architecture_hash(config) != ckpt.config_hash) {
    throw CheckpointError("checkpoint config hash does not match its embedded config");
  }
  auto env = envs::make_env(config.env, overrides_of(config));
  Rng scratch(0);
  training::Model model = training::make_model(training::model_config_for(config, *env), scratch);
  restore_params(ckpt, "online.", model.params());
  return {config, std::move(model)};
}

EvalReport evaluate_checkpoint(const std::string& path, std::int64_t episodes, std::uint64_t seed,
                               const RunConfig* expected) {
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  Checkpoint ckpt = load_checkpoint(path);
  if (expected && architecture_hash(*expected) != ckpt.config_hash) {
    throw CheckpointError(path + ": config hash mismatch, checkpoint was trained with a different "
                                 "architecture or environment");
  }
  LoadedModel loaded = load_model(ckpt);
  auto env = envs::make_env(loaded.config.env, overrides_of(loaded.config));
  Rng rng(splitmix64(seed ^ 0x6576616cULL));
  return {training::evaluate(*env, loaded.model, episodes, rng), loaded.config};
}

RunResult run_training(const RunConfig& config, const RunOptions& options) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  result.out_dir = resolve_output_dir(config);

  auto env = envs::make_env(config.env, overrides_of(config));
  auto eval_env = envs::make_env(config.env, overrides_of(config));
  Rng rng(config.seed);
  Rng eval_rng(splitmix64(config.seed ^ 0x6576616cULL));
  training::Learner learner(training::make_model(training::model_config_for(config, *env), rng),
                            config);
  training::ReplayBuffer buffer(config.buffer_capacity);
  const agents::EpsilonSchedule schedule{config.epsilon_start, config.epsilon_finish,
                                         config.epsilon_anneal_steps};

  std::int64_t env_steps = 0, episodes = 0, train_steps = 0;
  std::int64_t next_eval = config.eval_interval;
  std::int64_t next_ckpt = config.checkpoint_interval;
  std::int64_t last_row_steps = -1;
  Pending pending;

  if (!options.resume_from.empty()) {
    Checkpoint ckpt = load_checkpoint(options.resume_from);
    if (ckpt.config_hash != architecture_hash(config)) {
      throw CheckpointError(options.resume_from +
                            ": config hash mismatch, cannot resume with a different architecture "
                            "or environment");
    }
    restore_params(ckpt, "online.", learner.online().params());
    restore_params(ckpt, "target.", learner.target().params());
    const auto online = learner.online().params();
    auto& acc = learner.optimizer().mutable_accumulators();
    for (std::size_t k = 0; k < online.size(); ++k) {
      acc[k].copy_from(ckpt.tensor("optim.sq." + online[k].name));
    }
    env_steps = to_int(ckpt.meta_value("env_steps"));
    episodes = to_int(ckpt.meta_value("episodes"));
    train_steps = to_int(ckpt.meta_value("train_steps"));
    next_eval = to_int(ckpt.meta_value("next_eval"));
    next_ckpt = to_int(ckpt.meta_value("next_checkpoint"));
    last_row_steps = to_int(ckpt.meta_value("last_row_steps"));
    rng_from_text(rng, ckpt.meta_value("rng"));
    rng_from_text(eval_rng, ckpt.meta_value("eval_rng"));
    pending = Pending::decode(ckpt.meta_value("pending"));
  }

  std::ofstream metrics;
  if (options.write_files) {
    fs::create_directories(result.out_dir);
    {
      std::ofstream echo(fs::path(result.out_dir) / kResolvedConfigFile, std::ios::trunc);
      echo << to_text(config);
    }
    const fs::path metrics_path = fs::path(result.out_dir) / kMetricsFile;
    std::vector<MetricsRow> kept;
    if (!options.resume_from.empty() && fs::exists(metrics_path)) {
      for (auto& row : read_metrics_file(metrics_path.string()))
        if (row.env_steps <= env_steps) kept.push_back(row);
    }
    metrics.open(metrics_path, std::ios::trunc);
    for (const auto& row : kept) metrics << to_json_line(row) << '\n';
    metrics.flush();
  }

  auto counters = [&] {
    return std::map<std::string, std::string>{
        {"env_steps", std::to_string(env_steps)},
        {"episodes", std::to_string(episodes)},
        {"train_steps", std::to_string(train_steps)},
        {"next_eval", std::to_string(next_eval)},
        {"next_checkpoint", std::to_string(next_ckpt)},
        {"last_row_steps", std::to_string(last_row_steps)},
        {"rng", rng_text(rng)},
        {"eval_rng", rng_text(eval_rng)},
        {"pending", pending.encode()},
    };
  };
  auto save = [&](const std::string& name) {
    if (!options.write_files) return;
    save_checkpoint((fs::path(result.out_dir) / name).string(),
                    make_run_checkpoint(config, learner, counters()));
  };
  auto emit_row = [&] {
    auto summary = training::evaluate(*eval_env, learner.online(), config.eval_episodes, eval_rng);
    MetricsRow row;
    row.env_steps = env_steps;
    row.mean_return = summary.mean_return;
    row.success_rate = summary.success_rate;
    row.epsilon = schedule.value(env_steps);
    pending.fill(row);
    if (config.log_wallclock) {
      row.wallclock_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    pending = Pending{};
    last_row_steps = env_steps;
    if (metrics.is_open()) {
      metrics << to_json_line(row) << '\n';
      metrics.flush();
    }
    if (options.on_row) options.on_row(row);
    result.rows.push_back(std::move(row));
  };

  while (env_steps < config.total_env_steps) {
    for (std::int64_t k = 0; k < config.episodes_per_train; ++k) {
      auto stats = training::collect_episode(*env, learner.online(), schedule.value(env_steps),
                                             rng, buffer);
      env_steps += stats.length;
      ++episodes;
    }
    if (buffer.can_sample(config.batch_size)) {
      auto sampled = buffer.sample(config.batch_size, rng);
      training::EpisodeBatch batch = training::make_batch(sampled);
      pending.add(learner.train_step(batch, rng()));
      ++train_steps;
      if (train_steps % config.target_update_interval == 0) learner.sync_target();
    }
    if (env_steps >= next_eval) {
      while (next_eval <= env_steps) next_eval += config.eval_interval;
      emit_row();
    }
    if (env_steps >= next_ckpt) {
      while (next_ckpt <= env_steps) next_ckpt += config.checkpoint_interval;
      save(checkpoint_name(env_steps));
    }
  }
  if (env_steps > 0 && last_row_steps != env_steps) emit_row();
  save(kFinalCheckpoint);

  result.env_steps = env_steps;
  result.episodes = episodes;
  result.train_steps = train_steps;
  result.model = training::clone_model(learner.online());
  return result;
}

}  // namespace dagmix
