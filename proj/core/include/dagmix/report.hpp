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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dagmix/config.hpp"

namespace dagmix {

// Linear interpolation between order statistics (q in [0, 1]).
double quantile(std::vector<double> values, double q);

struct Band {
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
};
Band band_of(std::span<const double> values);

struct ReportRow {
  std::string algo;
  std::string env;
  std::int64_t env_steps = 0;
  std::int64_t n_seeds = 0;
  Band mean_return;
  std::optional<Band> success_rate;
};

// Every directory below `root` holding metrics.jsonl and config.resolved is
// one run. Rows are ordered by (algo, env, env_steps). Throws Error when no
// run is found.
std::vector<ReportRow> build_report(const std::string& root);

inline constexpr const char* kReportHeader =
    "algo,env,env_steps,n_seeds,return_median,return_p25,return_p75,success_median,success_p25,"
    "success_p75";
std::string to_csv(const std::vector<ReportRow>& rows);

// Cross-product directives: comma lists for algo / env / seed (seed also
// accepts a range a..b), jobs=N, and any other config key applied to every
// run.
struct SweepSpec {
  std::vector<std::string> algos;
  std::vector<std::string> envs;
  std::vector<std::uint64_t> seeds;
  std::int64_t jobs = 1;
  std::string root;  // empty: default output root
  std::vector<std::pair<std::string, std::string>> settings;
};

SweepSpec parse_sweep_spec(const std::string& text);
SweepSpec load_sweep_spec(const std::string& path);

// One resolved config per (algo, env, seed), each with its own output
// directory under spec.root.
std::vector<RunConfig> expand_sweep(const SweepSpec& spec, const RunConfig& base = {});

// Runs each config in a child process, at most spec.jobs at a time.
// Returns the number of failed runs.
std::int64_t run_sweep(const std::vector<RunConfig>& runs, std::int64_t jobs);

}  // namespace dagmix
