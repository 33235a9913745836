/* Copyright 2026 The ConchShell Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "conchshell/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace conchshell {
namespace {

using nlohmann::json;

bool any_notice_contains(const std::vector<std::string>& notices,
                         const std::string& needle) {
  return std::any_of(notices.begin(), notices.end(),
                     [&](const std::string& n) {
                       return n.find(needle) != std::string::npos;
                     });
}

std::string thrown_message(const json& j) {
  try {
    config_from_json(j, nullptr);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfigDefaults, MatchDocumentedValues) {
  const RunConfig c;
  EXPECT_EQ(c.data_root, "data/fixture");
  EXPECT_DOUBLE_EQ(c.split_ratio, 0.85);
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.profile, "paper");
  EXPECT_EQ(c.level, "deep");
  EXPECT_EQ(c.sample_rate, 16000u);
  EXPECT_EQ(c.image_side, 224u);
  EXPECT_EQ(c.tcnn.widths, (std::vector<size_t>{16, 32, 64, 64, 128, 128}));
  EXPECT_EQ(c.st.widths, (std::vector<size_t>{32, 64, 128, 256}));
  EXPECT_EQ(c.codec.d_lat, 64u);
  EXPECT_EQ(c.codec.codebook_size, 512u);
  EXPECT_DOUBLE_EQ(c.gan.lr0, 1e-5);
  EXPECT_DOUBLE_EQ(c.gan.beta1, 0.5);
  EXPECT_DOUBLE_EQ(c.gan.beta2, 0.999);
  EXPECT_DOUBLE_EQ(c.gan.weight_decay, 0.01);
  EXPECT_DOUBLE_EQ(c.gan.gen_decay, 0.8);
  EXPECT_DOUBLE_EQ(c.gan.disc_decay, 0.9);
  EXPECT_EQ(c.gan.decay_every, 20000u);
  EXPECT_DOUBLE_EQ(c.losses.lambda_gen, 0.5);
  EXPECT_DOUBLE_EQ(c.losses.lambda_fm, 3.0);
  EXPECT_DOUBLE_EQ(c.losses.lambda_wave, 40.0);
  EXPECT_DOUBLE_EQ(c.losses.lambda_mel, 15.0);
}

TEST(RunConfigDefaults, ProfilePinsClipLength) {
  RunConfig c;
  EXPECT_EQ(c.duration_s(), 8u);
  EXPECT_EQ(c.n_samples(), 128000u);
  c.profile = "test";
  EXPECT_EQ(c.duration_s(), 1u);
  EXPECT_EQ(c.n_samples(), 16000u);
  c.sample_rate = 8000;
  EXPECT_EQ(c.n_samples(), 8000u);
  c.profile = "demo";
  EXPECT_THROW(c.duration_s(), DataError);
}

TEST(ConfigFromJson, UnknownTopLevelKeyIsRejectedByName) {
  const std::string msg = thrown_message(json{{"data_roots", "x"}});
  EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
  EXPECT_NE(msg.find("data_roots"), std::string::npos) << msg;
}

TEST(ConfigFromJson, UnknownNestedKeyNamesItsSection) {
  const std::string msg = thrown_message(json{{"gan", {{"lr", 1e-4}}}});
  EXPECT_NE(msg.find("unknown key 'gan.lr'"), std::string::npos) << msg;
  const std::string msg2 =
      thrown_message(json{{"codec", {{"epochs", 3}}}});
  EXPECT_NE(msg2.find("codec.epochs"), std::string::npos) << msg2;
}

TEST(ConfigFromJson, MissingFieldsFallBackToDefaultsWithNotices) {
  std::vector<std::string> notices;
  const RunConfig c =
      config_from_json(json{{"profile", "test"},
                            {"gan", {{"steps", 7}}}},
                       &notices);
  EXPECT_EQ(c.profile, "test");
  EXPECT_EQ(c.gan.steps, 7u);
  EXPECT_EQ(c.seed, 17u);
  EXPECT_DOUBLE_EQ(c.gan.lr0, 1e-5);
  EXPECT_TRUE(any_notice_contains(notices, "seed missing, using default"));
  EXPECT_TRUE(any_notice_contains(notices, "gan.lr0 missing, using default"));
  EXPECT_TRUE(any_notice_contains(notices, "tcnn missing, using defaults"));
  EXPECT_TRUE(any_notice_contains(notices, "losses missing, using defaults"));
  EXPECT_FALSE(any_notice_contains(notices, "profile missing"));
}

TEST(ConfigFromJson, BadValueTypeNamesTheKey) {
  const std::string msg = thrown_message(json{{"split_ratio", "half"}});
  EXPECT_NE(msg.find("bad value for split_ratio"), std::string::npos) << msg;
  const std::string msg2 =
      thrown_message(json{{"tcnn", {{"widths", "wide"}}}});
  EXPECT_NE(msg2.find("bad value for tcnn.widths"), std::string::npos)
      << msg2;
}

TEST(ConfigFromJson, ValidatesRangesAndEnums) {
  EXPECT_THROW(config_from_json(json{{"profile", "epic"}}, nullptr),
               DataError);
  EXPECT_THROW(config_from_json(json{{"level", "ultra"}}, nullptr),
               DataError);
  EXPECT_THROW(config_from_json(json{{"sample_rate", 0}}, nullptr),
               DataError);
  EXPECT_THROW(config_from_json(json{{"split_ratio", 1.5}}, nullptr),
               DataError);
  EXPECT_THROW(
      config_from_json(json{{"gan", {{"beta1", 1.0}}}}, nullptr),
      DataError);
  EXPECT_THROW(
      config_from_json(json{{"gan", {{"beta2", -0.1}}}}, nullptr),
      DataError);
  EXPECT_THROW(config_from_json(json{{"gan", {{"lr0", 0.0}}}}, nullptr),
               DataError);
  EXPECT_THROW(
      config_from_json(json{{"gan", {{"gen_decay", 0.0}}}}, nullptr),
      DataError);
  EXPECT_THROW(
      config_from_json(json{{"gan", {{"disc_decay", 1.2}}}}, nullptr),
      DataError);
  EXPECT_NO_THROW(
      config_from_json(json{{"gan", {{"gen_decay", 1.0}}}}, nullptr));
}

TEST(ConfigFromJson, RoundTripsThroughJsonLosslessly) {
  RunConfig c;
  c.data_root = "/tmp/elsewhere";
  c.split_ratio = 0.7;
  c.seed = 99;
  c.out_dir = "runs/x";
  c.profile = "test";
  c.level = "low";
  c.sample_rate = 22050;
  c.image_side = 96;
  c.tcnn.widths = {4, 8, 12};
  c.tcnn.convs_per_block = 3;
  c.tcnn.epochs = 9;
  c.st.widths = {8, 16};
  c.st.pretrain_epochs = 2;
  c.codec.width = 24;
  c.codec.d_lat = 10;
  c.codec.codebook_size = 33;
  c.gan.width = 12;
  c.gan.res_kernel = 21;
  c.gan.lr0 = 3e-4;
  c.gan.decay_every = 123;
  c.losses.lambda_wave = 12.5;

  const json j = config_to_json(c);
  const RunConfig r = config_from_json(j, nullptr);
  EXPECT_EQ(config_to_json(r), j);
  EXPECT_EQ(r.tcnn.widths, c.tcnn.widths);
  EXPECT_EQ(r.gan.decay_every, 123u);
  EXPECT_DOUBLE_EQ(r.losses.lambda_wave, 12.5);
}

TEST(LoadConfig, ReadsFilesWithComments) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "conchshell_config_test";
  fs::create_directories(dir);
  const std::string path = (dir / "run.json").string();
  {
    std::ofstream f(path);
    f << "{\n"
         "  // one second keeps tests fast\n"
         "  \"profile\": \"test\",\n"
         "  \"codec\": { \"steps\": 42 } /* block comment */\n"
         "}\n";
  }
  std::vector<std::string> notices;
  const RunConfig c = load_config(path, &notices);
  EXPECT_EQ(c.profile, "test");
  EXPECT_EQ(c.codec.steps, 42u);
  EXPECT_TRUE(any_notice_contains(notices, "gan missing"));

  EXPECT_THROW(load_config((dir / "absent.json").string()), DataError);

  const std::string broken = (dir / "broken.json").string();
  {
    std::ofstream f(broken);
    f << "{ \"profile\": ";
  }
  try {
    load_config(broken);
    FAIL() << "parse error expected";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("config parse error"),
              std::string::npos)
        << e.what();
  }
  fs::remove_all(dir);
}

}  // namespace
}  // namespace conchshell
