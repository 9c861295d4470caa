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

#include "dagmix/report.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dagmix/errors.hpp"
#include "dagmix/runner.hpp"

namespace dagmix {

namespace fs = std::filesystem;

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Band band_of(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  return {quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75)};
}

std::vector<ReportRow> build_report(const std::string& root) {
  if (!fs::is_directory(root)) throw Error("report: " + root + " is not a directory");
  struct Series {
    std::map<std::int64_t, std::vector<double>> returns;
    std::map<std::int64_t, std::vector<double>> success;
  };
  std::map<std::pair<std::string, std::string>, Series> groups;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == kMetricsFile &&
        fs::exists(entry.path().parent_path() / kResolvedConfigFile)) {
      dirs.push_back(entry.path().parent_path());
    }
  }
  if (dirs.empty()) throw Error("report: no run directories under " + root);
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    RunConfig cfg = load_config_file((dir / kResolvedConfigFile).string());
    Series& s = groups[{mixers::to_string(cfg.algo), cfg.env}];
    for (const auto& row : read_metrics_file((dir / kMetricsFile).string())) {
      s.returns[row.env_steps].push_back(row.mean_return);
      if (row.success_rate) s.success[row.env_steps].push_back(*row.success_rate);
    }
  }
  std::vector<ReportRow> out;
  for (const auto& [key, s] : groups) {
    for (const auto& [steps, values] : s.returns) {
      ReportRow r;
      r.algo = key.first;
      r.env = key.second;
      r.env_steps = steps;
      r.n_seeds = static_cast<std::int64_t>(values.size());
      r.mean_return = band_of(values);
      auto it = s.success.find(steps);
      if (it != s.success.end()) r.success_rate = band_of(it->second);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string to_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream ss;
  ss.precision(17);
  ss << kReportHeader << '\n';
  for (const auto& r : rows) {
    ss << r.algo << ',' << r.env << ',' << r.env_steps << ',' << r.n_seeds << ','
       << r.mean_return.median << ',' << r.mean_return.p25 << ',' << r.mean_return.p75;
    if (r.success_rate) {
      ss << ',' << r.success_rate->median << ',' << r.success_rate->p25 << ','
         << r.success_rate->p75;
    } else {
      ss << ",,,";
    }
    ss << '\n';
  }
  return ss.str();
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::uint64_t parse_seed(const std::string& s) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("sweep: invalid seed '" + s + "'");
  }
}

}  // namespace

SweepSpec parse_sweep_spec(const std::string& text) {
  SweepSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto [key, value] = split_assignment(line);
      if (key == "algo") {
        for (const auto& a : split_list(value)) {
          mixers::parse_mixer_kind(a);
          spec.algos.push_back(a);
        }
      } else if (key == "env") {
        for (const auto& e : split_list(value)) spec.envs.push_back(e);
      } else if (key == "seed") {
        for (const auto& s : split_list(value)) {
          if (auto dots = s.find(".."); dots != std::string::npos) {
            const auto lo = parse_seed(s.substr(0, dots)), hi = parse_seed(s.substr(dots + 2));
            if (hi < lo) throw ConfigError("sweep: empty seed range '" + s + "'");
            for (auto k = lo; k <= hi; ++k) spec.seeds.push_back(k);
          } else {
            spec.seeds.push_back(parse_seed(s));
          }
        }
      } else if (key == "jobs") {
        spec.jobs = std::stoll(value);
        if (spec.jobs < 1) throw ConfigError("sweep: jobs must be >= 1");
      } else if (key == "root") {
        spec.root = value;
      } else if (key == "out") {
        throw ConfigError("sweep: use root= for the output root; each run gets its own out");
      } else {
        RunConfig probe;
        set_config_value(probe, key, value);
        spec.settings.emplace_back(key, value);
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("line " + std::to_string(lineno) + ": invalid number");
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (spec.algos.empty() || spec.envs.empty() || spec.seeds.empty()) {
    throw ConfigError("sweep: algo, env and seed must each list at least one value");
  }
  return spec;
}

SweepSpec load_sweep_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sweep spec " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sweep_spec(ss.str());
}

std::vector<RunConfig> expand_sweep(const SweepSpec& spec, const RunConfig& base) {
  const std::string root = spec.root.empty() ? default_output_root() : spec.root;
  std::vector<RunConfig> runs;
  for (const auto& algo : spec.algos) {
    for (const auto& env : spec.envs) {
      for (auto seed : spec.seeds) {
        RunConfig c = base;
        for (const auto& [k, v] : spec.settings) set_config_value(c, k, v);
        c.algo = mixers::parse_mixer_kind(algo);
        set_config_value(c, "env", env);
        c.seed = seed;
        c.out = (fs::path(root) / (algo + "_" + env + "_seed" + std::to_string(seed))).string();
        validate(c);
        runs.push_back(std::move(c));
      }
    }
  }
  return runs;
}

std::int64_t run_sweep(const std::vector<RunConfig>& runs, std::int64_t jobs) {
  std::int64_t failures = 0, running = 0;
  std::map<pid_t, std::string> children;
  auto reap = [&] {
    int status = 0;
    const pid_t pid = ::wait(&status);
    if (pid < 0) return;
    --running;
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      ++failures;
      std::cerr << "sweep: run " << children[pid] << " failed\n";
    }
    children.erase(pid);
  };
  for (const auto& cfg : runs) {
    while (running >= jobs) reap();
    std::cout.flush();
    std::cerr.flush();
    const pid_t pid = ::fork();
    if (pid < 0) throw Error("sweep: fork failed");
    if (pid == 0) {
      int code = 0;
      try {
        run_training(cfg);
      } catch (const std::exception& e) {
        std::cerr << cfg.out << ": " << e.what() << '\n';
        code = 1;
      }
      std::cerr.flush();
      std::_Exit(code);
    }
    children[pid] = cfg.out;
    ++running;
  }
  while (running > 0) reap();
  return failures;
}

}  // namespace dagmix
