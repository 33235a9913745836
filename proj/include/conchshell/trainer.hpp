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

// Training loops for the three stages. Everything is single-threaded and
// deterministic: batch order comes only from the caller-supplied generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/common.hpp"
#include "conchshell/config.hpp"
#include "conchshell/dsp/stft.hpp"
#include "conchshell/losses.hpp"
#include "conchshell/models/gan.hpp"
#include "conchshell/models/st_encoder.hpp"
#include "conchshell/models/tcnn.hpp"
#include "conchshell/models/vq_codec.hpp"
#include "conchshell/nn.hpp"
#include "conchshell/optim.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {

namespace detail {

// Stacks items[idx[0..n)] (each of identical shape) along a new first axis.
template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& items,
                const std::vector<size_t>& idx) {
  if (idx.empty()) throw DataError("stack: empty batch");
  std::vector<size_t> shape = items.at(idx[0]).shape();
  shape.insert(shape.begin(), idx.size());
  Tensor<T> out(shape);
  const size_t stride = items[idx[0]].numel();
  for (size_t i = 0; i < idx.size(); ++i) {
    const Tensor<T>& t = items.at(idx[i]);
    if (t.numel() != stride)
      throw DataError("stack: inconsistent item shapes");
    std::memcpy(out.data() + i * stride, t.data(), sizeof(T) * stride);
  }
  return out;
}

}  // namespace detail

// Finite check shared by the stage loops.
template <typename T>
double losses_scalar(const Var<T>& v, const char* term) {
  return static_cast<double>(detail::checked_scalar(v, term));
}

// Classifier stage. Returns the mean cross-entropy per epoch.
template <typename T>
std::vector<double> train_tcnn(Tcnn<T>& model,
                               const std::vector<Tensor<T>>& images,
                               const std::vector<int>& labels,
                               const TcnnTrainConfig& cfg, Rng& rng) {
  if (images.empty() || images.size() != labels.size())
    throw DataError("train_tcnn: need equally many images and labels");
  OptimizerConfig oc;
  oc.lr0 = cfg.lr;
  AdamW<T> opt(model.params().vars(), oc);
  std::vector<size_t> order(images.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> epoch_losses;
  for (size_t e = 0; e < cfg.epochs; ++e) {
    rng.shuffle(order.begin(), order.end());
    double total = 0;
    size_t batches = 0;
    for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
      std::vector<size_t> idx(
          order.begin() + at,
          order.begin() + std::min(order.size(), at + cfg.batch_size));
      std::vector<int> y;
      for (size_t i : idx) y.push_back(labels[i]);
      Var<T> logits =
          model.logits(Var<T>::constant(detail::stack(images, idx)));
      Var<T> loss = cross_entropy(logits, y);
      const double v = losses_scalar(loss, "tcnn loss");
      opt.zero_grad();
      backward(loss);
      opt.step();
      total += v;
      ++batches;
    }
    epoch_losses.push_back(total / static_cast<double>(batches));
  }
  return epoch_losses;
}

// Classification accuracy of a model on a labelled set.
template <typename T>
double tcnn_accuracy(const Tcnn<T>& model, const std::vector<Tensor<T>>& images,
                     const std::vector<int>& labels) {
  if (images.empty()) throw DataError("tcnn_accuracy: empty set");
  size_t hits = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    const Tensor<T> probs = model.classify(images[i]);
    size_t arg = 0;
    for (size_t k = 1; k < probs.numel(); ++k)
      if (probs[k] > probs[arg]) arg = k;
    if (static_cast<int>(arg) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

// Optional supervised warm start for the spatio-temporal encoder: a throwaway
// linear head classifies the time-mean embedding. The encoder is frozen
// afterwards either way.
template <typename T>
std::vector<double> pretrain_st(
    StEncoder<T>& st, const std::function<Tensor<T>(size_t)>& clip_at,
    const std::vector<int>& labels, size_t epochs, double lr, Rng& rng) {
  std::vector<double> epoch_losses;
  if (epochs > 0) {
    if (labels.empty()) throw DataError("pretrain_st: empty set");
    int n_classes = 0;
    for (int y : labels) n_classes = std::max(n_classes, y + 1);
    Params<T> head;
    Var<T> hw = head.uniform("w", {static_cast<size_t>(n_classes), st.d_st()},
                             st.d_st(), rng);
    Var<T> hb = head.zeros("b", {static_cast<size_t>(n_classes)});
    std::vector<Var<T>> vars = st.params().vars();
    vars.push_back(hw);
    vars.push_back(hb);
    OptimizerConfig oc;
    oc.lr0 = lr;
    AdamW<T> opt(vars, oc);
    std::vector<size_t> order(labels.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t e = 0; e < epochs; ++e) {
      rng.shuffle(order.begin(), order.end());
      double total = 0;
      for (size_t i : order) {
        Tensor<T> clip = clip_at(i);
        Tensor<T> batch({1, clip.dim(0), clip.dim(1), clip.dim(2),
                         clip.dim(3)});
        std::memcpy(batch.data(), clip.data(), sizeof(T) * clip.numel());
        Var<T> emb = mean_time(st.forward(Var<T>::constant(std::move(batch))));
        Var<T> loss = cross_entropy(linear(emb, hw, hb), {labels[i]});
        total += losses_scalar(loss, "st pretrain loss");
        opt.zero_grad();
        backward(loss);
        opt.step();
      }
      epoch_losses.push_back(total / static_cast<double>(order.size()));
    }
  }
  st.params().freeze();
  return epoch_losses;
}

// Seeds the codebook with encoder-output columns before codec training.
// A randomly initialized codebook quantizes early encoder outputs to noise,
// and the decoder then settles into ignoring its input entirely (it decodes
// everything to silence). Seeding from real encoder statistics keeps the
// quantized path informative from the first step. Columns are taken at a
// uniform stride over all items; tiny jitter keeps entries distinct where the
// source columns coincide (e.g. silent stretches).
template <typename T>
void seed_codebook(VqCodec<T>& codec, const std::vector<Tensor<T>>& waves,
                   Rng& rng) {
  if (waves.empty()) throw DataError("seed_codebook: empty set");
  std::vector<size_t> idx(waves.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Tensor<T> flat = detail::stack(waves, idx);  // (N,L)
  Tensor<T> batch({idx.size(), 1, flat.dim(1)});
  std::memcpy(batch.data(), flat.data(), sizeof(T) * flat.numel());
  Var<T> enc = codec.encode(Var<T>::constant(std::move(batch)));
  const Tensor<T>& z = enc.value();
  const size_t N = z.dim(0), D = z.dim(1), Tn = z.dim(2);
  Tensor<T>& book = codec.codebook().mutable_value();
  const size_t K = book.dim(0);
  const size_t pool = N * Tn;
  for (size_t k = 0; k < K; ++k) {
    const size_t c = (k * pool + pool / 2) / K % pool;
    const size_t n = c / Tn, t = c % Tn;
    for (size_t d = 0; d < D; ++d)
      book[k * D + d] = z[(n * D + d) * Tn + t] +
                        static_cast<T>(1e-4 * rng.normal());
  }
}

// Codec stage: L1 reconstruction + codebook regression + 0.25 * commitment.
// Returns the total loss per step.
template <typename T>
std::vector<double> train_codec(VqCodec<T>& codec,
                                const std::vector<Tensor<T>>& waves,
                                const CodecTrainConfig& cfg, Rng& rng) {
  if (waves.empty()) throw DataError("train_codec: empty set");
  OptimizerConfig oc;
  oc.lr0 = cfg.lr;
  AdamW<T> opt(codec.params().vars(), oc);
  std::vector<double> history;
  for (size_t s = 0; s < cfg.steps; ++s) {
    std::vector<size_t> idx;
    for (size_t j = 0; j < cfg.batch_size; ++j)
      idx.push_back(rng.uniform_int(waves.size()));
    Tensor<T> flat = detail::stack(waves, idx);            // (N,L)
    Tensor<T> batch({idx.size(), 1, flat.dim(1)});
    std::memcpy(batch.data(), flat.data(), sizeof(T) * flat.numel());
    Var<T> x = Var<T>::constant(std::move(batch));
    Var<T> z = codec.encode(x);
    auto [codes, zq] = quantize_batch(z.value(), codec.codebook().value());
    Var<T> recon = codec.decode(straight_through(z, zq));
    Var<T> l_rec = mean_abs_diff(recon, x);
    Var<T> l_cb = mean_sq_diff(embed_codes(codec.codebook(), codes),
                               Var<T>::constant(z.value()));
    Var<T> l_commit = mean_sq_diff(z, Var<T>::constant(zq));
    Var<T> loss =
        add(add(l_rec, l_cb), scale(l_commit, static_cast<T>(0.25)));
    history.push_back(losses_scalar(loss, "codec loss"));
    opt.zero_grad();
    backward(loss);
    opt.step();
  }
  return history;
}

// Frozen per-item context for the GAN stage; everything upstream of the
// generator is precomputed once.
template <typename T>
struct GanItem {
  Tensor<T> st;      // (d_st, t_frames) conditioning features
  Tensor<T> z_real;  // (d_lat, t_lat) quantized latents of the real audio
  Tensor<T> wave;    // (n_samples) real waveform
};

struct GanLogEntry {
  uint64_t step = 0;
  double lr_g = 0.0;
  double lr_d = 0.0;
  LossReport losses;
};

// Data-dependent output calibration (weight-norm-style init): rescales the
// generator's weights so that its initial DECODED audio is loud —
// loudness_gain times the corpus RMS. Rectifier cascades shrink activations
// layer by layer, so an uncalibrated generator starts out emitting
// near-silence: a degenerate point where the waveform loss barely responds
// and the log-mel loss pushes every band upward at once, overshooting into
// tanh saturation. Starting louder than the corpus puts every loss term on
// the same well-conditioned descent ("get quieter, match the target").
// The per-layer factor is found by bisection in the audio domain; at most
// `max_items` items are measured. Deterministic — no RNG involved.
template <typename T>
void calibrate_generator(Generator<T>& gen, const std::vector<GanItem<T>>& items,
                         const VqCodec<T>& codec, double loudness_gain = 3.0,
                         size_t max_items = 2) {
  if (items.empty()) throw DataError("calibrate_generator: empty set");
  const size_t t_lat = items[0].z_real.dim(1);
  const size_t n = std::min(items.size(), max_items);
  double sum_real = 0.0;
  size_t n_real = 0;
  for (size_t k = 0; k < n; ++k) {
    const GanItem<T>& item = items[k];
    for (size_t i = 0; i < item.wave.numel(); ++i)
      sum_real += static_cast<double>(item.wave[i]) * item.wave[i];
    n_real += item.wave.numel();
  }
  const double target =
      loudness_gain * std::sqrt(sum_real / static_cast<double>(n_real));
  if (target <= 0.0) return;
  // RMS of the decoded initial output with all generator weights scaled by c.
  // scale_weights is applied incrementally (the net is re-forwarded each time).
  double applied = 1.0;
  const auto decoded_rms = [&](double c) {
    gen.scale_weights(static_cast<T>(c / applied));
    applied = c;
    double acc = 0.0;
    size_t cnt = 0;
    for (size_t k = 0; k < n; ++k) {
      const GanItem<T>& item = items[k];
      Tensor<T> in({1, item.st.dim(0), item.st.dim(1)});
      std::memcpy(in.data(), item.st.data(), sizeof(T) * item.st.numel());
      Var<T> z = gen.forward(Var<T>::constant(std::move(in)), t_lat);
      Var<T> y = codec.decode(z);
      for (size_t i = 0; i < y.value().numel(); ++i)
        acc += static_cast<double>(y.value()[i]) * y.value()[i];
      cnt += y.value().numel();
    }
    return std::sqrt(acc / static_cast<double>(cnt));
  };
  double hi = 1.0;
  while (decoded_rms(hi) < target && hi < 64.0) hi *= 1.5;
  if (decoded_rms(hi) < target) {
    decoded_rms(1.0);  // target unreachable (decoder plateau): leave as-is
    return;
  }
  double lo = hi / 1.5;
  for (int it = 0; it < 12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (decoded_rms(mid) < target ? lo : hi) = mid;
  }
  decoded_rms(hi);  // leave the weights at the bracket's upper end
}

// Adversarial stage. Per step: one discriminator update on the hinge loss,
// then one generator update on the weighted composite. Gradient accumulation
// multiplies the effective batch size without changing the step count.
template <typename T>
std::vector<GanLogEntry> train_gan(
    const std::vector<GanItem<T>>& items, Generator<T>& gen,
    MultiScaleDiscriminator<T>& disc, const VqCodec<T>& codec,
    const MelComputer& mel, const GanTrainConfig& cfg, const LossWeights& w,
    Rng& rng, const std::function<void(uint64_t)>& on_checkpoint = {}) {
  if (items.empty()) throw DataError("train_gan: empty set");
  if (cfg.batch_size == 0 || cfg.grad_accum == 0)
    throw DataError("train_gan: batch_size and grad_accum must be > 0");
  const size_t t_lat = items[0].z_real.dim(1);
  const T inv_accum = T(1) / static_cast<T>(cfg.grad_accum);

  OptimizerConfig gc;
  gc.lr0 = cfg.lr0;
  gc.beta1 = cfg.beta1;
  gc.beta2 = cfg.beta2;
  gc.weight_decay = cfg.weight_decay;
  gc.lr_decay = cfg.gen_decay;
  gc.decay_every = cfg.decay_every;
  OptimizerConfig dc = gc;
  dc.lr_decay = cfg.disc_decay;
  AdamW<T> opt_g(gen.params().vars(), gc);
  AdamW<T> opt_d(disc.params().vars(), dc);

  std::vector<GanLogEntry> log;
  log.reserve(cfg.steps);
  for (uint64_t step = 0; step < cfg.steps; ++step) {
    GanLogEntry entry;
    entry.step = step;
    entry.lr_g = opt_g.current_lr();
    entry.lr_d = opt_d.current_lr();

    // One generator pass per item; the graphs stay alive for both phases.
    std::vector<size_t> idx;
    for (size_t j = 0; j < cfg.batch_size * cfg.grad_accum; ++j)
      idx.push_back(rng.uniform_int(items.size()));
    std::vector<Var<T>> z_fake;
    z_fake.reserve(idx.size());
    for (size_t i : idx) {
      const Tensor<T>& st = items[i].st;
      Tensor<T> in({1, st.dim(0), st.dim(1)});
      std::memcpy(in.data(), st.data(), sizeof(T) * st.numel());
      z_fake.push_back(gen.forward(Var<T>::constant(std::move(in)), t_lat));
    }
    auto real_input = [&](size_t i) {
      const Tensor<T>& zr = items[i].z_real;
      Tensor<T> in({1, zr.dim(0), zr.dim(1)});
      std::memcpy(in.data(), zr.data(), sizeof(T) * zr.numel());
      return Var<T>::constant(std::move(in));
    };

    // Discriminator phase.
    opt_d.zero_grad();
    opt_g.zero_grad();
    for (size_t a = 0; a < cfg.grad_accum; ++a) {
      std::vector<Var<T>> micro_d;
      for (size_t j = 0; j < cfg.batch_size; ++j) {
        const size_t pos = a * cfg.batch_size + j;
        auto outs_r = disc.forward(real_input(idx[pos]));
        auto outs_f =
            disc.forward(Var<T>::constant(z_fake[pos].value()));
        std::vector<Var<T>> sr, sf;
        for (auto& o : outs_r) sr.push_back(o.score);
        for (auto& o : outs_f) sf.push_back(o.score);
        micro_d.push_back(disc_loss(sr, sf));
      }
      Var<T> l_d = scale(average(micro_d), inv_accum);
      entry.losses.l_d += losses_scalar(l_d, "disc loss");
      backward(l_d);
    }
    opt_d.step();

    // Generator phase, through the updated discriminator.
    opt_g.zero_grad();
    opt_d.zero_grad();
    for (size_t a = 0; a < cfg.grad_accum; ++a) {
      std::vector<Var<T>> g_parts, fm_parts, wave_parts, mel_parts;
      for (size_t j = 0; j < cfg.batch_size; ++j) {
        const size_t pos = a * cfg.batch_size + j;
        const size_t i = idx[pos];
        auto outs_f = disc.forward(z_fake[pos]);
        auto outs_r = disc.forward(real_input(i));
        std::vector<Var<T>> sf;
        std::vector<std::vector<Var<T>>> fr, ff;
        for (auto& o : outs_f) {
          sf.push_back(o.score);
          ff.push_back(o.features);
        }
        for (auto& o : outs_r) {
          std::vector<Var<T>> layer;
          for (auto& v : o.features) layer.push_back(detach(v));
          fr.push_back(std::move(layer));
        }
        g_parts.push_back(gen_loss(sf));
        fm_parts.push_back(feature_matching_loss(fr, ff));
        Var<T> y = codec.decode(z_fake[pos]);  // (1,1,L)
        const Tensor<T>& wave = items[i].wave;
        Tensor<T> target({1, 1, wave.numel()});
        std::memcpy(target.data(), wave.data(), sizeof(T) * wave.numel());
        wave_parts.push_back(
            wave_loss(y, Var<T>::constant(std::move(target))));
        Tensor<T> wave1d(wave.shape());
        std::memcpy(wave1d.data(), wave.data(), sizeof(T) * wave.numel());
        mel_parts.push_back(mel_loss(reshape(y, {wave.numel()}),
                                     Var<T>::constant(std::move(wave1d)),
                                     mel));
      }
      LossReport part;
      Var<T> total =
          scale(total_loss(average(g_parts), average(fm_parts),
                           average(wave_parts), average(mel_parts), w, &part),
                inv_accum);
      entry.losses.l_g += part.l_g / cfg.grad_accum;
      entry.losses.l_fm += part.l_fm / cfg.grad_accum;
      entry.losses.l_wave += part.l_wave / cfg.grad_accum;
      entry.losses.l_mel += part.l_mel / cfg.grad_accum;
      losses_scalar(total, "generator total loss");
      backward(total);
    }
    opt_g.step();
    // Keep the logged combination exact even when accumulation splits the
    // arithmetic across micro-batches.
    entry.losses.l_cs =
        w.lambda_gen * entry.losses.l_g + w.lambda_fm * entry.losses.l_fm +
        w.lambda_wave * entry.losses.l_wave + w.lambda_mel * entry.losses.l_mel;
    log.push_back(entry);
    if (on_checkpoint && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0)
      on_checkpoint(step + 1);
  }
  return log;
}

}  // namespace conchshell
