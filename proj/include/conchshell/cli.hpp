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

// Pipeline orchestration behind the command-line driver. Each cmd_* function
// throws DataError/NumericError on failure; the driver maps those to exit
// codes.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "conchshell/checkpoint.hpp"
#include "conchshell/config.hpp"
#include "conchshell/data.hpp"
#include "conchshell/dsp/stoi.hpp"
#include "conchshell/trainer.hpp"

namespace conchshell {

using Real = double;

// Fixed directory layout under the run's output root.
struct OutputLayout {
  std::string root;

  explicit OutputLayout(std::string r) : root(std::move(r)) {}
  std::string checkpoints() const { return root + "/checkpoints"; }
  std::string logs() const { return root + "/logs"; }
  std::string reports() const { return root + "/reports"; }
  std::string wavs() const { return root + "/wavs"; }
  std::string manifest() const { return root + "/manifest.txt"; }
  std::string tcnn_ckpt() const { return checkpoints() + "/tcnn.ckpt"; }
  std::string codec_ckpt() const { return checkpoints() + "/codec.ckpt"; }
  std::string gan_ckpt() const { return checkpoints() + "/gan.ckpt"; }

  void create() const {
    namespace fs = std::filesystem;
    fs::create_directories(checkpoints());
    fs::create_directories(logs());
    fs::create_directories(reports());
    fs::create_directories(wavs());
  }
};

namespace detail {

inline DatasetManifest obtain_manifest(const RunConfig& cfg,
                                       const OutputLayout& out,
                                       std::ostream& log) {
  if (std::filesystem::is_regular_file(out.manifest()))
    return load_manifest(out.manifest());
  log << "manifest not found, building from " << cfg.data_root << "\n";
  DatasetManifest m = build_manifest(cfg.data_root, cfg.split_ratio, cfg.seed);
  save_manifest(m, out.manifest());
  return m;
}

template <typename T>
void load_images_labels(const DatasetManifest& m, bool train,
                        const RunConfig& cfg, std::vector<Tensor<T>>* images,
                        std::vector<int>* labels) {
  for (const auto& item : m.items) {
    if (item.train != train) continue;
    images->push_back(load_image<T>(item.image_path, cfg.image_side));
    labels->push_back(static_cast<int>(item.category));
  }
}

template <typename T>
std::vector<Tensor<T>> load_waves(const DatasetManifest& m, bool train,
                                  const RunConfig& cfg) {
  std::vector<Tensor<T>> out;
  for (const auto& item : m.items) {
    if (item.train != train) continue;
    const std::vector<double> x =
        load_audio(item.audio_path, cfg.n_samples(), cfg.sample_rate);
    Tensor<T> t({x.size()});
    for (size_t i = 0; i < x.size(); ++i) t[i] = static_cast<T>(x[i]);
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
void save_stage_checkpoint(
    const std::string& path, uint64_t step, const RunConfig& cfg,
    const std::vector<std::pair<std::string, const Params<T>*>>& models) {
  Checkpoint ck;
  ck.step = step;
  ck.config = config_to_json(cfg);
  for (const auto& m : models) m.second->save_into(&ck, m.first);
  save_checkpoint(ck, path);
}

inline Checkpoint require_checkpoint(const std::string& path,
                                     const char* stage, const char* needed) {
  if (!std::filesystem::is_regular_file(path))
    throw DataError(strf(stage, " requires the ", needed, " checkpoint at ",
                         path, "; run 'train ", needed, "' first"));
  return load_checkpoint(path);
}

inline std::string json_log_line(const GanLogEntry& e) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "{\"step\":" << e.step << ",\"lr_g\":" << e.lr_g
     << ",\"lr_d\":" << e.lr_d << ",\"l_d\":" << e.losses.l_d
     << ",\"l_g\":" << e.losses.l_g << ",\"l_fm\":" << e.losses.l_fm
     << ",\"l_wave\":" << e.losses.l_wave << ",\"l_mel\":" << e.losses.l_mel
     << ",\"l_cs\":" << e.losses.l_cs << "}";
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// prepare / train
// ---------------------------------------------------------------------------

inline void cmd_prepare(const RunConfig& cfg, std::ostream& log) {
  OutputLayout out(cfg.out_dir);
  out.create();
  DatasetManifest m = build_manifest(cfg.data_root, cfg.split_ratio, cfg.seed);
  save_manifest(m, out.manifest());
  const size_t n_train = m.split_indices(true).size();
  log << "manifest: " << m.items.size() << " items ("
      << n_train << " train, " << m.items.size() - n_train << " val), "
      << m.categories.size() << " categories -> " << out.manifest() << "\n";
}

inline void cmd_train_tcnn(const RunConfig& cfg, std::ostream& log) {
  OutputLayout out(cfg.out_dir);
  out.create();
  DatasetManifest m = detail::obtain_manifest(cfg, out, log);
  std::vector<Tensor<Real>> images;
  std::vector<int> labels;
  detail::load_images_labels(m, /*train=*/true, cfg, &images, &labels);
  if (images.empty()) throw DataError("train tcnn: empty training split");
  Rng init_rng = Rng(cfg.seed).fork("tcnn-init");
  Tcnn<Real> model(cfg.tcnn_model_config(), init_rng);
  Rng train_rng = Rng(cfg.seed).fork("tcnn-train");
  const std::vector<double> history =
      train_tcnn(model, images, labels, cfg.tcnn, train_rng);
  std::ofstream lf(out.logs() + "/tcnn_train.log", std::ios::binary);
  for (size_t e = 0; e < history.size(); ++e)
    lf << "epoch " << e << " loss " << std::setprecision(17) << history[e]
       << "\n";
  detail::save_stage_checkpoint<Real>(out.tcnn_ckpt(), history.size(), cfg,
                                      {{"tcnn.", &model.params()}});
  log << "tcnn: " << history.size() << " epochs, final loss "
      << (history.empty() ? 0.0 : history.back()) << ", train accuracy "
      << tcnn_accuracy(model, images, labels) << " -> " << out.tcnn_ckpt()
      << "\n";
}

inline void cmd_train_codec(const RunConfig& cfg, std::ostream& log) {
  OutputLayout out(cfg.out_dir);
  out.create();
  DatasetManifest m = detail::obtain_manifest(cfg, out, log);
  std::vector<Tensor<Real>> waves =
      detail::load_waves<Real>(m, /*train=*/true, cfg);
  if (waves.empty()) throw DataError("train codec: empty training split");
  Rng init_rng = Rng(cfg.seed).fork("codec-init");
  VqCodec<Real> model(cfg.codec_model_config(), init_rng);
  if (cfg.n_samples() % model.hop() != 0)
    throw DataError(strf("audio length ", cfg.n_samples(),
                         " not divisible by codec hop ", model.hop()));
  Rng seed_rng = Rng(cfg.seed).fork("codec-seed");
  seed_codebook(model, waves, seed_rng);
  Rng train_rng = Rng(cfg.seed).fork("codec-train");
  const std::vector<double> history =
      train_codec(model, waves, cfg.codec, train_rng);
  std::ofstream lf(out.logs() + "/codec_train.log", std::ios::binary);
  for (size_t s = 0; s < history.size(); ++s)
    lf << "step " << s << " loss " << std::setprecision(17) << history[s]
       << "\n";
  detail::save_stage_checkpoint<Real>(out.codec_ckpt(), history.size(), cfg,
                                      {{"codec.", &model.params()}});
  log << "codec: " << history.size() << " steps, final loss "
      << (history.empty() ? 0.0 : history.back()) << " -> "
      << out.codec_ckpt() << "\n";
}

inline void cmd_train_gan(const RunConfig& cfg, std::ostream& log) {
  OutputLayout out(cfg.out_dir);
  out.create();
  DatasetManifest m = detail::obtain_manifest(cfg, out, log);

  const Checkpoint tcnn_ck =
      detail::require_checkpoint(out.tcnn_ckpt(), "train gan", "tcnn");
  const Checkpoint codec_ck =
      detail::require_checkpoint(out.codec_ckpt(), "train gan", "codec");

  Rng throwaway(0);
  Tcnn<Real> tcnn(cfg.tcnn_model_config(), throwaway);
  tcnn.params().load_from(tcnn_ck, "tcnn.");
  tcnn.params().freeze();
  VqCodec<Real> codec(cfg.codec_model_config(), throwaway);
  codec.params().load_from(codec_ck, "codec.");
  codec.params().freeze();

  const size_t t_frames = 3 * cfg.tcnn.widths.size();
  Rng st_rng = Rng(cfg.seed).fork("st-init");
  StEncoder<Real> st(cfg.st_model_config(t_frames), st_rng);

  // Per-item image pipeline, shared by the optional warm start and the
  // training-set precomputation.
  std::vector<const ManifestItem*> train_items;
  for (const auto& item : m.items)
    if (item.train) train_items.push_back(&item);
  if (train_items.empty()) throw DataError("train gan: empty training split");
  const std::function<Tensor<Real>(size_t)> clip_at = [&](size_t i) {
    const Tensor<Real> img =
        load_image<Real>(train_items[i]->image_path, cfg.image_side);
    return forge_time_feature(tcnn.extract_block_features(img),
                              cfg.image_side);
  };
  std::vector<int> labels;
  for (const auto* item : train_items)
    labels.push_back(static_cast<int>(item->category));
  Rng pre_rng = Rng(cfg.seed).fork("st-pretrain");
  pretrain_st(st, clip_at, labels, cfg.st.pretrain_epochs, cfg.st.pretrain_lr,
              pre_rng);

  if (cfg.n_samples() % codec.hop() != 0)
    throw DataError(strf("audio length ", cfg.n_samples(),
                         " not divisible by codec hop ", codec.hop()));
  const size_t t_lat = cfg.n_samples() / codec.hop();

  log << "precomputing frozen features for " << train_items.size()
      << " items\n";
  std::vector<GanItem<Real>> items;
  for (size_t i = 0; i < train_items.size(); ++i) {
    GanItem<Real> it;
    it.st = st.encode(clip_at(i));
    const std::vector<double> x = load_audio(
        train_items[i]->audio_path, cfg.n_samples(), cfg.sample_rate);
    it.wave = Tensor<Real>({x.size()});
    for (size_t j = 0; j < x.size(); ++j) it.wave[j] = x[j];
    auto [codes, zq] =
        quantize(codec.encode_tensor(it.wave), codec.codebook().value());
    (void)codes;
    it.z_real = std::move(zq);
    items.push_back(std::move(it));
  }

  GeneratorConfig gcfg;
  gcfg.d_st = st.d_st();
  gcfg.d_lat = cfg.codec.d_lat;
  gcfg.width = cfg.gan.width;
  gcfg.upsample_stages = generator_upsample_stages(cfg.codec_level());
  gcfg.res_kernel = cfg.gan.res_kernel;
  gcfg.n_res_blocks = cfg.gan.n_res_blocks;
  gcfg.stage_kernel = cfg.gan.stage_kernel;
  Rng gen_rng = Rng(cfg.seed).fork("gen-init");
  Generator<Real> gen(gcfg, gen_rng);

  DiscriminatorConfig dcfg;
  dcfg.d_lat = cfg.codec.d_lat;
  dcfg.width = cfg.gan.disc_width;
  Rng disc_rng = Rng(cfg.seed).fork("disc-init");
  MultiScaleDiscriminator<Real> disc(dcfg, disc_rng);

  if (t_lat % gen.upsample_factor() != 0)
    throw DataError(strf("latent length ", t_lat,
                         " not divisible by generator upsample factor ",
                         gen.upsample_factor()));
  calibrate_generator(gen, items, codec);

  MelConfig mc;
  mc.sample_rate = cfg.sample_rate;
  const MelComputer mel(mc);

  const auto save_gan = [&](const std::string& path, uint64_t step) {
    detail::save_stage_checkpoint<Real>(path, step, cfg,
                                        {{"g.", &gen.params()},
                                         {"d.", &disc.params()},
                                         {"st.", &st.params()}});
  };
  Rng train_rng = Rng(cfg.seed).fork("gan-train");
  const std::vector<GanLogEntry> history = train_gan(
      items, gen, disc, codec, mel, cfg.gan, cfg.losses, train_rng,
      [&](uint64_t step) {
        save_gan(strf(out.checkpoints(), "/gan_step", step, ".ckpt"), step);
      });
  std::ofstream lf(out.logs() + "/gan_train.jsonl", std::ios::binary);
  for (const auto& e : history) lf << detail::json_log_line(e) << "\n";
  save_gan(out.gan_ckpt(), history.size());
  log << "gan: " << history.size() << " steps";
  if (!history.empty())
    log << ", final l_cs " << history.back().losses.l_cs;
  log << " -> " << out.gan_ckpt() << "\n";
}

// ---------------------------------------------------------------------------
// generate / evaluate
// ---------------------------------------------------------------------------

// Frozen end-to-end pipeline reassembled from the three stage checkpoints.
class GenerationPipeline {
 public:
  static GenerationPipeline load(const OutputLayout& out,
                                 const std::string& profile) {
    const Checkpoint gan_ck =
        detail::require_checkpoint(out.gan_ckpt(), "generate", "gan");
    const Checkpoint tcnn_ck =
        detail::require_checkpoint(out.tcnn_ckpt(), "generate", "tcnn");
    const Checkpoint codec_ck =
        detail::require_checkpoint(out.codec_ckpt(), "generate", "codec");
    GenerationPipeline p;
    p.cfg_ = config_from_json(gan_ck.config, nullptr);
    if (!profile.empty()) p.cfg_.profile = profile;
    Rng throwaway(0);
    p.tcnn_ = std::make_unique<Tcnn<Real>>(p.cfg_.tcnn_model_config(),
                                           throwaway);
    p.tcnn_->params().load_from(tcnn_ck, "tcnn.");
    p.tcnn_->params().freeze();
    p.codec_ = std::make_unique<VqCodec<Real>>(p.cfg_.codec_model_config(),
                                               throwaway);
    p.codec_->params().load_from(codec_ck, "codec.");
    p.codec_->params().freeze();
    const size_t t_frames = 3 * p.cfg_.tcnn.widths.size();
    p.st_ = std::make_unique<StEncoder<Real>>(
        p.cfg_.st_model_config(t_frames), throwaway);
    p.st_->params().load_from(gan_ck, "st.");
    p.st_->params().freeze();
    GeneratorConfig gcfg;
    gcfg.d_st = p.st_->d_st();
    gcfg.d_lat = p.cfg_.codec.d_lat;
    gcfg.width = p.cfg_.gan.width;
    gcfg.upsample_stages =
        generator_upsample_stages(p.cfg_.codec_level());
    gcfg.res_kernel = p.cfg_.gan.res_kernel;
    gcfg.n_res_blocks = p.cfg_.gan.n_res_blocks;
    gcfg.stage_kernel = p.cfg_.gan.stage_kernel;
    p.gen_ = std::make_unique<Generator<Real>>(gcfg, throwaway);
    p.gen_->params().load_from(gan_ck, "g.");
    p.gen_->params().freeze();
    return p;
  }

  const RunConfig& config() const { return cfg_; }

  // Image file -> waveform of exactly n_samples() samples in [-1,1].
  std::vector<double> generate(const std::string& image_path) const {
    const Tensor<Real> img = load_image<Real>(image_path, cfg_.image_side);
    const Tensor<Real> clip = forge_time_feature(
        tcnn_->extract_block_features(img), cfg_.image_side);
    const Tensor<Real> stf = st_->encode(clip);
    if (cfg_.n_samples() % codec_->hop() != 0)
      throw DataError(strf("audio length ", cfg_.n_samples(),
                           " not divisible by codec hop ", codec_->hop()));
    const size_t t_lat = cfg_.n_samples() / codec_->hop();
    Tensor<Real> in({1, stf.dim(0), stf.dim(1)});
    std::memcpy(in.data(), stf.data(), sizeof(Real) * stf.numel());
    Var<Real> z = gen_->forward(Var<Real>::constant(std::move(in)), t_lat);
    Tensor<Real> z2({z.shape()[1], z.shape()[2]});
    std::memcpy(z2.data(), z.value().data(), sizeof(Real) * z2.numel());
    const Tensor<Real> y = codec_->decode_tensor(z2);
    std::vector<double> wave(y.numel());
    for (size_t i = 0; i < wave.size(); ++i)
      wave[i] = static_cast<double>(y[i]);
    return wave;
  }

 private:
  GenerationPipeline() = default;

  RunConfig cfg_;
  std::unique_ptr<Tcnn<Real>> tcnn_;
  std::unique_ptr<StEncoder<Real>> st_;
  std::unique_ptr<VqCodec<Real>> codec_;
  std::unique_ptr<Generator<Real>> gen_;
};

inline void cmd_generate(const RunConfig& cfg, const std::string& image_path,
                         std::string wav_out, std::ostream& log) {
  OutputLayout out(cfg.out_dir);
  out.create();
  const GenerationPipeline p = GenerationPipeline::load(out, cfg.profile);
  const std::vector<double> wave = p.generate(image_path);
  if (wav_out.empty())
    wav_out = strf(out.wavs(), "/",
                   std::filesystem::path(image_path).stem().string(), ".wav");
  write_wav(wav_out, wave, static_cast<uint32_t>(p.config().sample_rate));
  log << "wrote " << wave.size() << " samples ("
      << p.config().duration_s() << " s at " << p.config().sample_rate
      << " Hz) -> " << wav_out << "\n";
}

inline void cmd_evaluate(const RunConfig& cfg, const std::string& pesq_file,
                         std::ostream& log) {
  OutputLayout out(cfg.out_dir);
  out.create();
  DatasetManifest m = detail::obtain_manifest(cfg, out, log);
  const GenerationPipeline p = GenerationPipeline::load(out, cfg.profile);
  const std::vector<size_t> val = m.split_indices(false);
  if (val.empty()) throw DataError("evaluate: validation split is empty");

  // Optional external PESQ scores: lines of "<item_id> <score>".
  std::vector<std::string> pesq(m.items.size(), "n/a");
  if (!pesq_file.empty()) {
    std::ifstream pf(pesq_file);
    if (!pf) throw DataError(strf("cannot open PESQ score file ", pesq_file));
    size_t id;
    double score;
    while (pf >> id >> score)
      if (id < pesq.size()) pesq[id] = strf(score);
  }

  std::ofstream report(out.reports() + "/stoi_report.txt", std::ios::binary);
  std::ofstream sheet(out.reports() + "/mos_sheet.csv", std::ios::binary);
  sheet << "# ConchShell MOS rating sheet. Rate every item twice: complete\n"
        << "# pass 1 for all items, then repeat the full list as pass 2.\n"
        << "# Scores: 1 (bad) .. 5 (excellent), one per metric.\n"
        << "item,audio,pass,i2m_mos,melody_mos,noise_mos\n";
  report << "item\timage\tstoi\tpesq\n";
  double total = 0;
  size_t scored = 0, skipped = 0;
  for (const size_t i : val) {
    const ManifestItem& item = m.items[i];
    if (!std::filesystem::is_regular_file(item.audio_path)) {
      log << "warning: missing audio " << item.audio_path << ", skipping\n";
      ++skipped;
      continue;
    }
    const std::vector<double> gen_wave = p.generate(item.image_path);
    const std::vector<double> gt =
        load_audio(item.audio_path, cfg.n_samples(), cfg.sample_rate);
    const std::string wav_path = strf(out.wavs(), "/eval_", i, ".wav");
    write_wav(wav_path, gen_wave,
              static_cast<uint32_t>(p.config().sample_rate));
    const double s =
        stoi(gt, gen_wave, static_cast<double>(cfg.sample_rate));
    report << i << "\t" << item.image_path << "\t" << std::setprecision(6)
           << s << "\t" << pesq[i] << "\n";
    sheet << i << "," << wav_path << ",1,,,\n";
    sheet << i << "," << wav_path << ",2,,,\n";
    total += s;
    ++scored;
  }
  if (scored == 0) throw DataError("evaluate: no items could be scored");
  report << "mean\t\t" << std::setprecision(6) << total / scored << "\t\n";
  report << "scored\t" << scored << "\n";
  report << "skipped\t" << skipped << "\n";
  log << "evaluate: mean STOI " << std::setprecision(6) << total / scored
      << " over " << scored << " items (" << skipped << " skipped) -> "
      << out.reports() << "\n";
}

// Reads back a (partially) filled MOS sheet and reports mean and sample
// standard deviation per metric across all filled cells.
inline void cmd_aggregate_mos(const std::string& sheet_path,
                              const std::string& summary_out,
                              std::ostream& log) {
  std::ifstream f(sheet_path);
  if (!f) throw DataError(strf("cannot open MOS sheet ", sheet_path));
  const char* names[3] = {"i2m_mos", "melody_mos", "noise_mos"};
  std::vector<double> scores[3];
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    size_t pos = 0;
    while (true) {
      const size_t c = line.find(',', pos);
      fields.push_back(
          line.substr(pos, c == std::string::npos ? std::string::npos
                                                  : c - pos));
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    if (fields.size() != 6)
      throw DataError(strf("malformed MOS sheet row: ", line));
    for (size_t k = 0; k < 3; ++k) {
      const std::string& cell = fields[3 + k];
      if (cell.empty()) continue;
      try {
        scores[k].push_back(std::stod(cell));
      } catch (...) {
        throw DataError(strf("bad MOS score '", cell, "' in row: ", line));
      }
    }
  }
  std::ostringstream os;
  for (size_t k = 0; k < 3; ++k) {
    const auto& v = scores[k];
    if (v.empty()) {
      os << names[k] << ": no scores\n";
      continue;
    }
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double sd = 0;
    if (v.size() > 1) {
      for (double x : v) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
    }
    os << names[k] << ": mean " << std::setprecision(6) << mean << " sd "
       << sd << " n " << v.size() << "\n";
  }
  if (!summary_out.empty()) {
    std::ofstream sf(summary_out, std::ios::binary);
    sf << os.str();
  }
  log << os.str();
}

}  // namespace conchshell
