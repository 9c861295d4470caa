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

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dagmix/config.hpp"
#include "dagmix/errors.hpp"
#include "dagmix/report.hpp"
#include "dagmix/runner.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kBadConfig = 2, kDiverged = 3 };

struct RunFlags {
  std::optional<std::string> algo;
  std::optional<std::string> env;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::string> out;
  std::string config_path;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--algo", f.algo, "vdn, qmix, dagmix, dagvdn or fcgmix");
  cmd->add_option("--env", f.env, "matrix, spread5, spread8, spread25 or spread27");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--steps", f.steps, "Total environment steps");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--config", f.config_path, "key=value config file");
  cmd->add_option("--set", f.sets, "Extra key=value override, repeatable");
}

// defaults < config file < --set < named flags
dagmix::RunConfig resolve(const RunFlags& f) {
  dagmix::RunConfig c;
  if (!f.config_path.empty()) c = dagmix::load_config_file(f.config_path);
  for (const auto& s : f.sets) {
    auto [k, v] = dagmix::split_assignment(s);
    dagmix::set_config_value(c, k, v);
  }
  if (f.algo) dagmix::set_config_value(c, "algo", *f.algo);
  if (f.env) dagmix::set_config_value(c, "env", *f.env);
  if (f.seed) c.seed = *f.seed;
  if (f.steps) c.total_env_steps = *f.steps;
  if (f.out) c.out = *f.out;
  dagmix::validate(c);
  return c;
}

bool flags_given(const RunFlags& f) {
  return f.algo || f.env || f.seed || f.steps || !f.config_path.empty() || !f.sets.empty();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int cmd_train(const RunFlags& f, const std::string& resume) {
  dagmix::RunConfig c = resolve(f);
  dagmix::RunOptions opts;
  opts.resume_from = resume;
  opts.on_row = [](const dagmix::MetricsRow& row) {
    std::cout << "env_steps=" << row.env_steps << " mean_return=" << fmt(row.mean_return);
    if (row.success_rate) std::cout << " success_rate=" << fmt(*row.success_rate);
    if (row.loss) std::cout << " loss=" << fmt(*row.loss);
    std::cout << " epsilon=" << fmt(row.epsilon) << '\n';
  };
  auto result = dagmix::run_training(c, opts);
  std::cout << "finished " << result.env_steps << " env steps, " << result.train_steps
            << " train steps; output in " << result.out_dir << '\n';
  return kOk;
}

int cmd_eval(const std::string& path, std::int64_t episodes, std::uint64_t seed,
             const RunFlags& f) {
  std::optional<dagmix::RunConfig> expected;
  if (flags_given(f)) expected = resolve(f);
  auto report = dagmix::evaluate_checkpoint(path, episodes, seed, expected ? &*expected : nullptr);
  const auto& s = report.summary;
  std::cout << "episodes " << s.returns.size() << '\n';
  if (!s.returns.empty()) std::cout << "mean_return " << fmt(s.mean_return) << '\n';
  if (s.success_rate) std::cout << "success_rate " << fmt(*s.success_rate) << '\n';
  std::cout << "returns";
  for (double r : s.returns) std::cout << ' ' << fmt(r);
  std::cout << '\n';
  return kOk;
}

int cmd_sweep(const std::string& spec_path, std::int64_t jobs) {
  auto spec = dagmix::load_sweep_spec(spec_path);
  if (jobs > 0) spec.jobs = jobs;
  auto runs = dagmix::expand_sweep(spec);
  std::cout << "sweep: " << runs.size() << " runs, " << spec.jobs << " at a time\n";
  const auto failed = dagmix::run_sweep(runs, spec.jobs);
  std::cout << "sweep: " << runs.size() - failed << " succeeded, " << failed << " failed\n";
  return failed == 0 ? kOk : kFailure;
}

int cmd_report(const std::string& dir, const std::string& out) {
  const std::string csv = dagmix::to_csv(dagmix::build_report(dir));
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream file(out, std::ios::trunc);
    if (!file) throw dagmix::Error("cannot write " + out);
    file << csv;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dagmix: value-decomposition MARL with dynamic agent graphs"};
  app.require_subcommand(1);

  RunFlags train_flags;
  std::string resume;
  auto* train = app.add_subcommand("train", "Train one run");
  add_run_flags(train, train_flags);
  train->add_option("--resume", resume, "Checkpoint to resume from");

  RunFlags eval_flags;
  std::string ckpt;
  std::int64_t episodes = 32;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval->add_option("checkpoint", ckpt, "Checkpoint file")->required();
  eval->add_option("--episodes", episodes, "Number of episodes")->check(CLI::NonNegativeNumber);
  eval->add_option("--eval-seed", eval_seed, "Seed for environment resets");
  add_run_flags(eval, eval_flags);

  std::string spec_path;
  std::int64_t jobs = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a cross-product of configurations");
  sweep->add_option("spec", spec_path, "Sweep spec file")->required();
  sweep->add_option("--jobs", jobs, "Parallel processes (overrides the spec)");

  std::string report_dir, report_out;
  auto* report = app.add_subcommand("report", "Aggregate runs into a CSV");
  report->add_option("dir", report_dir, "Directory containing run directories")->required();
  report->add_option("--csv", report_out, "Write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_flags, resume);
    if (*eval) return cmd_eval(ckpt, episodes, eval_seed, eval_flags);
    if (*sweep) return cmd_sweep(spec_path, jobs);
    if (*report) return cmd_report(report_dir, report_out);
  } catch (const dagmix::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const dagmix::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
