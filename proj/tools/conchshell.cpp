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

// Command-line driver. Exit codes: 0 success, 1 usage, 2 data error,
// 3 numeric failure.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "conchshell/cli.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string profile;
  std::string level;
  uint64_t seed = 0;
  bool have_seed = false;
};

void add_common(CLI::App* cmd, CommonFlags* f) {
  cmd->add_option("--config", f->config_path, "JSON run configuration file");
  cmd->add_option("--out", f->out_dir, "output root directory");
  cmd->add_option("--profile", f->profile, "audio length profile")
      ->check(CLI::IsMember({"paper", "test"}));
  cmd->add_option("--level", f->level, "latent resolution preset")
      ->check(CLI::IsMember({"high", "low", "deep"}));
  cmd->add_option_function<uint64_t>(
      "--seed",
      [f](const uint64_t& s) {
        f->seed = s;
        f->have_seed = true;
      },
      "random seed override");
}

conchshell::RunConfig resolve_config(const CommonFlags& f) {
  conchshell::RunConfig cfg;
  if (!f.config_path.empty()) {
    std::vector<std::string> notices;
    cfg = conchshell::load_config(f.config_path, &notices);
    for (const auto& n : notices) std::cerr << n << "\n";
  }
  if (const char* env = std::getenv("CONCHSHELL_DATA"))
    if (*env) cfg.data_root = env;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (!f.profile.empty()) cfg.profile = f.profile;
  if (!f.level.empty()) cfg.level = f.level;
  if (f.have_seed) cfg.seed = f.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ConchShell: piano pieces from images"};
  app.require_subcommand(1);

  CommonFlags prep_f, train_f, gen_f, eval_f;
  std::string stage, image_path, wav_out, pesq_file, sheet_path, summary_out;
  std::string fixture_dir = "data/fixture";
  size_t fix_categories = 6, fix_pairs = 4;
  double fix_seconds = 1.2;
  uint64_t fix_seed = 7;

  CLI::App* prepare = app.add_subcommand(
      "prepare", "scan the corpus and write the dataset manifest");
  add_common(prepare, &prep_f);

  CLI::App* train =
      app.add_subcommand("train", "run one training stage");
  train->add_option("stage", stage, "training stage")
      ->required()
      ->check(CLI::IsMember({"tcnn", "codec", "gan"}));
  add_common(train, &train_f);

  CLI::App* generate = app.add_subcommand(
      "generate", "synthesize a piano piece from one image");
  generate->add_option("--image", image_path, "input image (PNG or JPEG)")
      ->required();
  generate->add_option("--wav", wav_out,
                       "output WAV path (default under --out/wavs)");
  add_common(generate, &gen_f);

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score the validation split and emit the MOS sheet");
  evaluate->add_option("--pesq-scores", pesq_file,
                       "externally computed PESQ scores (item id, score)");
  add_common(evaluate, &eval_f);

  CLI::App* agg = app.add_subcommand(
      "aggregate-mos", "summarize a filled MOS rating sheet");
  agg->add_option("--sheet", sheet_path, "filled mos_sheet.csv")->required();
  agg->add_option("--summary", summary_out, "summary output file");

  CLI::App* fixture = app.add_subcommand(
      "make-fixture", "write the synthetic test corpus");
  fixture->add_option("--dir", fixture_dir, "fixture directory");
  fixture->add_option("--categories", fix_categories, "category count");
  fixture->add_option("--pairs", fix_pairs, "pairs per category");
  fixture->add_option("--seconds", fix_seconds, "nominal clip length");
  fixture->add_option("--seed", fix_seed, "fixture seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (prepare->parsed()) {
      conchshell::cmd_prepare(resolve_config(prep_f), std::cout);
    } else if (train->parsed()) {
      const conchshell::RunConfig cfg = resolve_config(train_f);
      if (stage == "tcnn")
        conchshell::cmd_train_tcnn(cfg, std::cout);
      else if (stage == "codec")
        conchshell::cmd_train_codec(cfg, std::cout);
      else
        conchshell::cmd_train_gan(cfg, std::cout);
    } else if (generate->parsed()) {
      conchshell::cmd_generate(resolve_config(gen_f), image_path, wav_out,
                               std::cout);
    } else if (evaluate->parsed()) {
      conchshell::cmd_evaluate(resolve_config(eval_f), pesq_file, std::cout);
    } else if (agg->parsed()) {
      conchshell::cmd_aggregate_mos(sheet_path, summary_out, std::cout);
    } else if (fixture->parsed()) {
      conchshell::make_fixture(fixture_dir, fix_categories, fix_pairs,
                               fix_seconds, fix_seed);
      std::cout << "fixture: " << fix_categories * fix_pairs << " pairs -> "
                << fixture_dir << "\n";
    }
  } catch (const conchshell::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const conchshell::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
