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

// Run configuration: one JSON file drives every pipeline stage. Unknown keys
// are rejected; missing keys fall back to the documented defaults and are
// reported through the notice list.

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "conchshell/common.hpp"
#include "conchshell/losses.hpp"
#include "conchshell/models/st_encoder.hpp"
#include "conchshell/models/tcnn.hpp"
#include "conchshell/models/vq_codec.hpp"

namespace conchshell {

struct TcnnTrainConfig {
  std::vector<size_t> widths = {16, 32, 64, 64, 128, 128};
  size_t convs_per_block = 1;
  size_t epochs = 4;
  double lr = 1e-3;
  size_t batch_size = 8;
};

struct StConfig {
  std::vector<size_t> widths = {32, 64, 128, 256};
  size_t pretrain_epochs = 0;
  double pretrain_lr = 1e-3;
};

struct CodecTrainConfig {
  size_t width = 32;
  size_t d_lat = 64;
  size_t codebook_size = 512;
  size_t steps = 500;
  double lr = 1e-3;
  size_t batch_size = 2;
};

struct GanTrainConfig {
  size_t width = 64;
  size_t disc_width = 64;
  size_t n_res_blocks = 2;
  size_t res_kernel = 40;
  size_t stage_kernel = 5;
  size_t steps = 20000;
  size_t checkpoint_every = 1000;
  size_t grad_accum = 1;
  double lr0 = 1e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double gen_decay = 0.8;
  double disc_decay = 0.9;
  size_t decay_every = 20000;
  size_t batch_size = 2;
};

struct RunConfig {
  std::string data_root = "data/fixture";
  double split_ratio = 0.85;
  uint64_t seed = 17;
  std::string out_dir = "out";
  std::string profile = "paper";  // paper: 8 s audio; test: 1 s
  std::string level = "deep";     // latent resolution: high | low | deep
  size_t sample_rate = 16000;
  size_t image_side = 224;
  TcnnTrainConfig tcnn;
  StConfig st;
  CodecTrainConfig codec;
  GanTrainConfig gan;
  LossWeights losses;

  size_t duration_s() const {
    if (profile == "paper") return 8;
    if (profile == "test") return 1;
    throw DataError(strf("unknown profile '", profile, "'"));
  }
  size_t n_samples() const { return duration_s() * sample_rate; }
  CodecLevel codec_level() const { return codec_level_from_string(level); }

  TcnnConfig tcnn_model_config() const {
    TcnnConfig c;
    c.image_side = image_side;
    c.widths = tcnn.widths;
    c.convs_per_block = tcnn.convs_per_block;
    return c;
  }
  StEncoderConfig st_model_config(size_t n_classes_frames) const {
    StEncoderConfig c;
    c.t_frames = n_classes_frames;
    c.image_side = image_side;
    c.widths = st.widths;
    return c;
  }
  VqCodecConfig codec_model_config() const {
    VqCodecConfig c;
    c.level = codec_level();
    c.d_lat = codec.d_lat;
    c.codebook_size = codec.codebook_size;
    c.width = codec.width;
    return c;
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const std::string& scope) {
  if (!j.is_object())
    throw DataError(strf("config: ", scope, " must be an object"));
  for (const auto& kv : j.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || kv.key() == k;
    if (!ok)
      throw DataError(strf("config: unknown key '", scope, kv.key(), "'"));
  }
}

template <typename T>
void get_field(const nlohmann::json& j, const char* key, T* dst,
               const std::string& scope, std::vector<std::string>* notices) {
  if (j.contains(key)) {
    try {
      *dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(strf("config: bad value for ", scope, key, ": ",
                           e.what()));
    }
  } else if (notices) {
    notices->push_back(strf("config: ", scope, key, " missing, using default"));
  }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j,
                                  std::vector<std::string>* notices) {
  RunConfig c;
  detail::check_keys(j,
                     {"data_root", "split_ratio", "seed", "out_dir", "profile",
                      "level", "sample_rate", "image_side", "tcnn", "st",
                      "codec", "gan", "losses"},
                     "");
  detail::get_field(j, "data_root", &c.data_root, "", notices);
  detail::get_field(j, "split_ratio", &c.split_ratio, "", notices);
  detail::get_field(j, "seed", &c.seed, "", notices);
  detail::get_field(j, "out_dir", &c.out_dir, "", notices);
  detail::get_field(j, "profile", &c.profile, "", notices);
  detail::get_field(j, "level", &c.level, "", notices);
  detail::get_field(j, "sample_rate", &c.sample_rate, "", notices);
  detail::get_field(j, "image_side", &c.image_side, "", notices);
  if (j.contains("tcnn")) {
    const auto& t = j.at("tcnn");
    detail::check_keys(
        t, {"widths", "convs_per_block", "epochs", "lr", "batch_size"},
        "tcnn.");
    detail::get_field(t, "widths", &c.tcnn.widths, "tcnn.", notices);
    detail::get_field(t, "convs_per_block", &c.tcnn.convs_per_block, "tcnn.",
                      notices);
    detail::get_field(t, "epochs", &c.tcnn.epochs, "tcnn.", notices);
    detail::get_field(t, "lr", &c.tcnn.lr, "tcnn.", notices);
    detail::get_field(t, "batch_size", &c.tcnn.batch_size, "tcnn.", notices);
  } else if (notices) {
    notices->push_back("config: tcnn missing, using defaults");
  }
  if (j.contains("st")) {
    const auto& t = j.at("st");
    detail::check_keys(t, {"widths", "pretrain_epochs", "pretrain_lr"}, "st.");
    detail::get_field(t, "widths", &c.st.widths, "st.", notices);
    detail::get_field(t, "pretrain_epochs", &c.st.pretrain_epochs, "st.",
                      notices);
    detail::get_field(t, "pretrain_lr", &c.st.pretrain_lr, "st.", notices);
  } else if (notices) {
    notices->push_back("config: st missing, using defaults");
  }
  if (j.contains("codec")) {
    const auto& t = j.at("codec");
    detail::check_keys(
        t, {"width", "d_lat", "codebook_size", "steps", "lr", "batch_size"},
        "codec.");
    detail::get_field(t, "width", &c.codec.width, "codec.", notices);
    detail::get_field(t, "d_lat", &c.codec.d_lat, "codec.", notices);
    detail::get_field(t, "codebook_size", &c.codec.codebook_size, "codec.",
                      notices);
    detail::get_field(t, "steps", &c.codec.steps, "codec.", notices);
    detail::get_field(t, "lr", &c.codec.lr, "codec.", notices);
    detail::get_field(t, "batch_size", &c.codec.batch_size, "codec.",
                      notices);
  } else if (notices) {
    notices->push_back("config: codec missing, using defaults");
  }
  if (j.contains("gan")) {
    const auto& t = j.at("gan");
    detail::check_keys(t,
                       {"width", "disc_width", "n_res_blocks", "res_kernel",
                        "stage_kernel", "steps", "checkpoint_every",
                        "grad_accum", "lr0", "beta1", "beta2", "weight_decay",
                        "gen_decay", "disc_decay", "decay_every",
                        "batch_size"},
                       "gan.");
    detail::get_field(t, "width", &c.gan.width, "gan.", notices);
    detail::get_field(t, "disc_width", &c.gan.disc_width, "gan.", notices);
    detail::get_field(t, "n_res_blocks", &c.gan.n_res_blocks, "gan.",
                      notices);
    detail::get_field(t, "res_kernel", &c.gan.res_kernel, "gan.", notices);
    detail::get_field(t, "stage_kernel", &c.gan.stage_kernel, "gan.",
                      notices);
    detail::get_field(t, "steps", &c.gan.steps, "gan.", notices);
    detail::get_field(t, "checkpoint_every", &c.gan.checkpoint_every, "gan.",
                      notices);
    detail::get_field(t, "grad_accum", &c.gan.grad_accum, "gan.", notices);
    detail::get_field(t, "lr0", &c.gan.lr0, "gan.", notices);
    detail::get_field(t, "beta1", &c.gan.beta1, "gan.", notices);
    detail::get_field(t, "beta2", &c.gan.beta2, "gan.", notices);
    detail::get_field(t, "weight_decay", &c.gan.weight_decay, "gan.",
                      notices);
    detail::get_field(t, "gen_decay", &c.gan.gen_decay, "gan.", notices);
    detail::get_field(t, "disc_decay", &c.gan.disc_decay, "gan.", notices);
    detail::get_field(t, "decay_every", &c.gan.decay_every, "gan.", notices);
    detail::get_field(t, "batch_size", &c.gan.batch_size, "gan.", notices);
  } else if (notices) {
    notices->push_back("config: gan missing, using defaults");
  }
  if (j.contains("losses")) {
    const auto& t = j.at("losses");
    detail::check_keys(
        t, {"lambda_gen", "lambda_fm", "lambda_wave", "lambda_mel"},
        "losses.");
    detail::get_field(t, "lambda_gen", &c.losses.lambda_gen, "losses.",
                      notices);
    detail::get_field(t, "lambda_fm", &c.losses.lambda_fm, "losses.",
                      notices);
    detail::get_field(t, "lambda_wave", &c.losses.lambda_wave, "losses.",
                      notices);
    detail::get_field(t, "lambda_mel", &c.losses.lambda_mel, "losses.",
                      notices);
  } else if (notices) {
    notices->push_back("config: losses missing, using defaults");
  }
  // Validation shared by every stage.
  c.duration_s();
  c.codec_level();
  if (c.sample_rate == 0) throw DataError("config: sample_rate must be > 0");
  if (!(c.split_ratio >= 0.0 && c.split_ratio <= 1.0))
    throw DataError("config: split_ratio must lie in [0,1]");
  if (!(c.gan.beta1 >= 0.0 && c.gan.beta1 < 1.0) ||
      !(c.gan.beta2 >= 0.0 && c.gan.beta2 < 1.0))
    throw DataError("config: betas must lie in [0,1)");
  if (c.gan.lr0 <= 0.0) throw DataError("config: lr0 must be > 0");
  if (!(c.gan.gen_decay > 0.0 && c.gan.gen_decay <= 1.0) ||
      !(c.gan.disc_decay > 0.0 && c.gan.disc_decay <= 1.0))
    throw DataError("config: decay factors must lie in (0,1]");
  return c;
}

// Comments are allowed in config files so defaults can be documented inline.
inline RunConfig load_config(const std::string& path,
                             std::vector<std::string>* notices = nullptr) {
  std::ifstream f(path);
  if (!f) throw DataError(strf("cannot open config ", path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(strf("config parse error in ", path, ": ", e.what()));
  }
  return config_from_json(j, notices);
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["data_root"] = c.data_root;
  j["split_ratio"] = c.split_ratio;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["profile"] = c.profile;
  j["level"] = c.level;
  j["sample_rate"] = c.sample_rate;
  j["image_side"] = c.image_side;
  j["tcnn"] = {{"widths", c.tcnn.widths},
               {"convs_per_block", c.tcnn.convs_per_block},
               {"epochs", c.tcnn.epochs},
               {"lr", c.tcnn.lr},
               {"batch_size", c.tcnn.batch_size}};
  j["st"] = {{"widths", c.st.widths},
             {"pretrain_epochs", c.st.pretrain_epochs},
             {"pretrain_lr", c.st.pretrain_lr}};
  j["codec"] = {{"width", c.codec.width},
                {"d_lat", c.codec.d_lat},
                {"codebook_size", c.codec.codebook_size},
                {"steps", c.codec.steps},
                {"lr", c.codec.lr},
                {"batch_size", c.codec.batch_size}};
  j["gan"] = {{"width", c.gan.width},
              {"disc_width", c.gan.disc_width},
              {"n_res_blocks", c.gan.n_res_blocks},
              {"res_kernel", c.gan.res_kernel},
              {"stage_kernel", c.gan.stage_kernel},
              {"steps", c.gan.steps},
              {"checkpoint_every", c.gan.checkpoint_every},
              {"grad_accum", c.gan.grad_accum},
              {"lr0", c.gan.lr0},
              {"beta1", c.gan.beta1},
              {"beta2", c.gan.beta2},
              {"weight_decay", c.gan.weight_decay},
              {"gen_decay", c.gan.gen_decay},
              {"disc_decay", c.gan.disc_decay},
              {"decay_every", c.gan.decay_every},
              {"batch_size", c.gan.batch_size}};
  j["losses"] = {{"lambda_gen", c.losses.lambda_gen},
                 {"lambda_fm", c.losses.lambda_fm},
                 {"lambda_wave", c.losses.lambda_wave},
                 {"lambda_mel", c.losses.lambda_mel}};
  return j;
}

}  // namespace conchshell
