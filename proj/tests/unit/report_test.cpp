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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dagmix/errors.hpp"
#include "dagmix/report.hpp"
#include "dagmix/runner.hpp"

namespace dagmix {
namespace {

namespace fs = std::filesystem;

std::string error_of(const std::string& text) {
  try {
    parse_sweep_spec(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

void fake_run(const fs::path& dir, const std::string& algo, const std::string& env,
              std::uint64_t seed, const std::vector<std::pair<double, std::optional<double>>>& rows) {
  fs::create_directories(dir);
  RunConfig c;
  c.algo = mixers::parse_mixer_kind(algo);
  c.env = env;
  c.seed = seed;
  std::ofstream(dir / kResolvedConfigFile) << to_text(c);
  std::ofstream m(dir / kMetricsFile);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    MetricsRow r;
    r.env_steps = 100 * static_cast<std::int64_t>(k + 1);
    r.mean_return = rows[k].first;
    r.success_rate = rows[k].second;
    m << to_json_line(r) << '\n';
  }
}

TEST(Quantile, InterpolatesBetweenOrderStatistics) {
  const std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.3), 7.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Quantile, FiveSeedsUseOrderStatistics) {
  const std::vector<double> v = {9.0, -1.0, 5.0, 3.0, 7.0};
  const Band b = band_of(v);
  EXPECT_EQ(b.median, 5.0);
  EXPECT_EQ(b.p25, 3.0);
  EXPECT_EQ(b.p75, 7.0);
}

TEST(Report, AggregatesAcrossSeeds) {
  const fs::path root = fs::path(::testing::TempDir()) / "report_test";
  fs::remove_all(root);
  const double r[5] = {1, 5, 2, 4, 3};
  for (int s = 0; s < 5; ++s) {
    fake_run(root / ("vdn_spread5_seed" + std::to_string(s)), "vdn", "spread5", s,
             {{r[s], 0.1 * s}, {10 * r[s], 0.2}});
  }
  fake_run(root / "nested" / "qmix_matrix_seed0", "qmix", "matrix", 0, {{12.0, std::nullopt}});
  fs::create_directories(root / "stray");
  std::ofstream(root / "stray" / kMetricsFile) << "";

  const auto rows = build_report(root.string());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].algo, "qmix");
  EXPECT_EQ(rows[0].n_seeds, 1);
  EXPECT_FALSE(rows[0].success_rate.has_value());
  EXPECT_EQ(rows[1].algo, "vdn");
  EXPECT_EQ(rows[1].env_steps, 100);
  EXPECT_EQ(rows[1].n_seeds, 5);
  EXPECT_EQ(rows[1].mean_return.median, 3.0);
  EXPECT_EQ(rows[1].mean_return.p25, 2.0);
  EXPECT_EQ(rows[1].mean_return.p75, 4.0);
  EXPECT_DOUBLE_EQ(rows[1].success_rate->median, 0.2);
  EXPECT_EQ(rows[2].mean_return.median, 30.0);

  const std::string csv = to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kReportHeader);
  EXPECT_NE(csv.find("qmix,matrix,100,1,12,12,12,,,\n"), std::string::npos);
  EXPECT_NE(csv.find("vdn,spread5,200,5,30,20,40,0.2"), std::string::npos);
  EXPECT_THROW(build_report((root / "stray").string()), Error);
  EXPECT_THROW(build_report((root / "absent").string()), Error);
}

TEST(Sweep, ParsesListsRangesAndSettings) {
  const SweepSpec s = parse_sweep_spec(
      "# grid\nalgo = vdn, dagmix\nenv = matrix\nseed = 0..2, 9\njobs = 2\nroot = /tmp/sw\n"
      "total_env_steps = 500\n");
  EXPECT_EQ(s.algos, (std::vector<std::string>{"vdn", "dagmix"}));
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{0, 1, 2, 9}));
  EXPECT_EQ(s.jobs, 2);
  const auto runs = expand_sweep(s);
  ASSERT_EQ(runs.size(), 8u);
  EXPECT_EQ(runs[0].out, "/tmp/sw/vdn_matrix_seed0");
  EXPECT_EQ(runs[7].out, "/tmp/sw/dagmix_matrix_seed9");
  for (const auto& r : runs) EXPECT_EQ(r.total_env_steps, 500);
}

TEST(Sweep, ErrorsNameTheLine) {
  EXPECT_NE(error_of("algo = vdn\nenv = matrix\nseed = x\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("algo = iql\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("algo=vdn\nenv=matrix\nseed=1\nwidth=3\n").find("line 4"), std::string::npos);
  EXPECT_NE(error_of("algo=vdn\nenv=matrix\nseed=3..1\n").find("empty seed range"),
            std::string::npos);
  EXPECT_NE(error_of("algo=vdn\nenv=matrix\nseed=1\nout=x\n").find("root="), std::string::npos);
  EXPECT_NE(error_of("algo=vdn\nseed=1\n").find("at least one value"), std::string::npos);
}

}  // namespace
}  // namespace dagmix
