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

#include <cstdlib>

#include "dagmix/config.hpp"
#include "dagmix/errors.hpp"

namespace dagmix {
namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsValidate) {
  EXPECT_NO_THROW(validate(RunConfig{}));
  EXPECT_EQ(config_keys().size(), 36u);
}

TEST(Config, EchoRoundTrips) {
  RunConfig c;
  c.algo = mixers::MixerKind::kFcgmix;
  c.env = "spread8";
  c.seed = 17;
  c.gamma = 0.95;
  c.learning_rate = 1.0 / 3.0;
  c.noise_mode = graphgen::NoiseMode::kLiteral;
  c.gumbel_lambda = 0.3;
  c.log_wallclock = true;
  c.out = "some/dir";
  const RunConfig back = parse_config(to_text(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_text(back), to_text(c));
  for (const auto& key : config_keys()) EXPECT_NO_THROW(get_config_value(c, key)) << key;
}

TEST(Config, ParsesCommentsAndWhitespace) {
  const RunConfig c = parse_config("# header\n  algo = qmix  # inline\n\n"
                                   "total_env_steps=1000\n",
                                   RunConfig{});
  EXPECT_EQ(c.algo, mixers::MixerKind::kQmix);
  EXPECT_EQ(c.total_env_steps, 1000);
}

TEST(Config, RejectsUnknownKeysWithLineNumbers) {
  EXPECT_NE(error_of("algo = vdn\nbogus = 1\n").find("line 2: unknown config key 'bogus'"),
            std::string::npos);
  EXPECT_NE(error_of("gamma = lots").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("env = smac").find("valid envs"), std::string::npos);
  EXPECT_NE(error_of("algo = iql").find("valid kinds: vdn, qmix, dagmix, dagvdn, fcgmix"),
            std::string::npos);
  EXPECT_NE(error_of("just words").find("expected key=value"), std::string::npos);
  EXPECT_THROW(load_config_file("/nonexistent/dagmix.cfg"), ConfigError);
}

TEST(Config, ValidateRejectsOutOfRange) {
  auto bad = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(validate(c), ConfigError);
  };
  bad([](RunConfig& c) { c.gamma = 1.0; });
  bad([](RunConfig& c) { c.batch_size = 0; });
  bad([](RunConfig& c) { c.gumbel_tau = 0.0; });
  bad([](RunConfig& c) { c.learning_rate = -1.0; });
  bad([](RunConfig& c) { c.mixing_layers = 3; });
}

TEST(Config, ArchitectureHashTracksShapesOnly) {
  RunConfig a;
  RunConfig b = a;
  b.seed = 99;
  b.learning_rate = 0.1;
  b.total_env_steps = 7;
  EXPECT_EQ(architecture_hash(a), architecture_hash(b));
  for (const char* key : {"agent_hidden", "attention_dim", "episode_limit"}) {
    RunConfig c = a;
    set_config_value(c, key, "5");
    EXPECT_NE(architecture_hash(a), architecture_hash(c)) << key;
  }
  RunConfig d = a;
  d.algo = mixers::MixerKind::kVdn;
  EXPECT_NE(architecture_hash(a), architecture_hash(d));
}

TEST(Config, OutputDirectory) {
  RunConfig c;
  c.algo = mixers::MixerKind::kDagvdn;
  c.env = "spread5";
  c.seed = 4;
  ::setenv("DAGMIX_OUT", "/tmp/root", 1);
  EXPECT_EQ(resolve_output_dir(c), "/tmp/root/dagvdn_spread5_seed4");
  ::unsetenv("DAGMIX_OUT");
  EXPECT_EQ(default_output_root(), "runs");
  c.out = "explicit";
  EXPECT_EQ(resolve_output_dir(c), "explicit");
}

TEST(Config, SplitAssignment) {
  EXPECT_EQ(split_assignment(" seed = 3 "), (std::pair<std::string, std::string>{"seed", "3"}));
  EXPECT_THROW(split_assignment("seed"), ConfigError);
}

}  // namespace
}  // namespace dagmix
