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

// Latent-space generator and multi-scale discriminator. Both are fully
// convolutional over time, so one set of weights serves any output length
// that the upsampling factor divides.

#pragma once

#include <string>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/common.hpp"
#include "conchshell/conv_ops.hpp"
#include "conchshell/models/vq_codec.hpp"
#include "conchshell/nn.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {

// Pre-activation residual block: x + conv(act(conv(act(x)))). With all
// weights and biases zero the block is an exact identity.
template <typename T>
class ResBlock1d {
 public:
  ResBlock1d(Params<T>& params, const std::string& prefix, size_t channels,
             size_t kernel, Rng& rng)
      : kernel_(kernel) {
    w1_ = params.uniform(prefix + ".c1.w", {channels, channels, kernel},
                         channels * kernel, rng);
    b1_ = params.zeros(prefix + ".c1.b", {channels});
    w2_ = params.uniform(prefix + ".c2.w", {channels, channels, kernel},
                         channels * kernel, rng);
    b2_ = params.zeros(prefix + ".c2.b", {channels});
  }

  Var<T> forward(const Var<T>& x) const {
    const size_t pl = (kernel_ - 1) / 2, pr = kernel_ - 1 - pl;
    Var<T> h = conv1d(leaky_relu(x, static_cast<T>(0.2)), w1_, b1_, 1, pl, pr);
    h = conv1d(leaky_relu(h, static_cast<T>(0.2)), w2_, b2_, 1, pl, pr);
    return add(x, h);
  }

 private:
  size_t kernel_;
  Var<T> w1_, b1_, w2_, b2_;
};

struct GeneratorConfig {
  size_t d_st = 256;
  size_t d_lat = 64;
  size_t width = 64;
  // 2x transposed-convolution stages after the base stack.
  size_t upsample_stages = 4;
  // Long kernel of the base residual blocks.
  size_t res_kernel = 40;
  size_t n_res_blocks = 2;
  // Short kernel of the per-stage residual blocks.
  size_t stage_kernel = 5;
};

// Upsampling depth per latent resolution: the deeper the codec level, the
// more 2x stages the generator needs.
inline size_t generator_upsample_stages(CodecLevel level) {
  switch (level) {
    case CodecLevel::kHigh: return 0;
    case CodecLevel::kLow: return 2;
    case CodecLevel::kDeep: return 4;
  }
  throw Error("generator_upsample_stages: bad level");
}

template <typename T>
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.res_kernel < 2 || cfg_.n_res_blocks < 1)
      throw DataError("generator: need at least one long-kernel block");
    in_w_ = params_.uniform("in.w", {cfg_.width, cfg_.d_st, 1}, cfg_.d_st,
                            rng);
    in_b_ = params_.zeros("in.b", {cfg_.width});
    for (size_t i = 0; i < cfg_.n_res_blocks; ++i)
      base_.emplace_back(params_, strf("base", i), cfg_.width,
                         cfg_.res_kernel, rng);
    for (size_t i = 0; i < cfg_.upsample_stages; ++i) {
      up_w_.push_back(params_.uniform(strf("up", i, ".w"),
                                      {cfg_.width, cfg_.width, 4},
                                      cfg_.width * 4, rng));
      up_b_.push_back(params_.zeros(strf("up", i, ".b"), {cfg_.width}));
      stage_.emplace_back(params_, strf("stage", i), cfg_.width,
                          cfg_.stage_kernel, rng);
    }
    out_w_ = params_.uniform("out.w", {cfg_.d_lat, cfg_.width, 1}, cfg_.width,
                             rng);
    out_b_ = params_.zeros("out.b", {cfg_.d_lat});
  }

  const GeneratorConfig& config() const { return cfg_; }
  Params<T>& params() { return params_; }
  const Params<T>& params() const { return params_; }
  size_t upsample_factor() const { return size_t(1) << cfg_.upsample_stages; }

  // (N,d_st,T_in) -> (N,d_lat,t_lat). The base rate is t_lat divided by the
  // upsample factor; the conditioning sequence is linearly resampled to it.
  Var<T> forward(const Var<T>& st, size_t t_lat) const {
    if (st.shape().size() != 3 || st.shape()[1] != cfg_.d_st)
      throw DataError(strf("generator: want (N,", cfg_.d_st, ",T), got ",
                           Tensor<T>::shape_str(st.value().shape())));
    const size_t factor = upsample_factor();
    if (t_lat == 0 || t_lat % factor != 0)
      throw DataError(strf("generator: output length ", t_lat,
                           " not divisible by upsample factor ", factor));
    Var<T> h = conv1d(st, in_w_, in_b_, 1, 0, 0);
    h = interp_linear(h, t_lat / factor);
    for (const auto& blk : base_) h = blk.forward(h);
    for (size_t i = 0; i < up_w_.size(); ++i) {
      h = leaky_relu(conv_transpose1d(h, up_w_[i], up_b_[i], 2, 1),
                     static_cast<T>(0.2));
      h = stage_[i].forward(h);
    }
    return conv1d(h, out_w_, out_b_, 1, 0, 0);
  }

  // Rescales every parameter in place; used by data-dependent output
  // calibration before adversarial training. Spreading the scale over all
  // layers (rather than one) keeps each weight O(1), so optimizer steps move
  // the output smoothly instead of through one stiff amplification layer.
  void scale_weights(T factor) {
    for (const auto& it : params_.all()) {
      Tensor<T>& v = it.second.mutable_value();
      for (size_t i = 0; i < v.numel(); ++i) v[i] *= factor;
    }
  }

 private:
  GeneratorConfig cfg_;
  Params<T> params_;
  Var<T> in_w_, in_b_, out_w_, out_b_;
  std::vector<ResBlock1d<T>> base_, stage_;
  std::vector<Var<T>> up_w_, up_b_;
};

struct DiscriminatorConfig {
  size_t d_lat = 64;
  size_t width = 64;
  size_t n_scales = 3;
  // Strided layers per scale after the stem.
  size_t n_strided = 3;
  size_t stride = 4;
};

// Score and per-layer activations of one scale.
template <typename T>
struct DiscOutput {
  Var<T> score;
  std::vector<Var<T>> features;
};

template <typename T>
class MultiScaleDiscriminator {
 public:
  MultiScaleDiscriminator(const DiscriminatorConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    if (cfg_.n_scales < 1) throw DataError("discriminator: no scales");
    for (size_t k = 0; k < cfg_.n_scales; ++k) {
      Scale sc;
      sc.stem_w = params_.uniform(strf("d", k, ".stem.w"),
                                  {cfg_.width, cfg_.d_lat, 15},
                                  cfg_.d_lat * 15, rng);
      sc.stem_b = params_.zeros(strf("d", k, ".stem.b"), {cfg_.width});
      const size_t kk = 4 * cfg_.stride;
      for (size_t j = 0; j < cfg_.n_strided; ++j) {
        sc.w.push_back(params_.uniform(strf("d", k, ".conv", j, ".w"),
                                       {cfg_.width, cfg_.width, kk},
                                       cfg_.width * kk, rng));
        sc.b.push_back(params_.zeros(strf("d", k, ".conv", j, ".b"),
                                     {cfg_.width}));
      }
      sc.head_w = params_.uniform(strf("d", k, ".head.w"),
                                  {1, cfg_.width, 3}, cfg_.width * 3, rng);
      sc.head_b = params_.zeros(strf("d", k, ".head.b"), {1});
      scales_.push_back(std::move(sc));
    }
  }

  const DiscriminatorConfig& config() const { return cfg_; }
  Params<T>& params() { return params_; }
  const Params<T>& params() const { return params_; }

  // Latents (N,d_lat,T) -> one output per scale. Scale k sees the input
  // average-pooled by 2^k (scale 0 sees it unpooled).
  std::vector<DiscOutput<T>> forward(const Var<T>& z) const {
    if (z.shape().size() != 3 || z.shape()[1] != cfg_.d_lat)
      throw DataError(strf("discriminator: want (N,", cfg_.d_lat, ",T), got ",
                           Tensor<T>::shape_str(z.value().shape())));
    std::vector<DiscOutput<T>> outs;
    outs.reserve(scales_.size());
    for (size_t k = 0; k < scales_.size(); ++k) {
      Var<T> h = (k == 0) ? z : avg_pool1d(z, size_t(1) << k);
      const Scale& sc = scales_[k];
      DiscOutput<T> out;
      h = leaky_relu(conv1d(h, sc.stem_w, sc.stem_b, 1, 7, 7),
                     static_cast<T>(0.2));
      out.features.push_back(h);
      const size_t kk = 4 * cfg_.stride;
      const size_t pad = (kk - cfg_.stride) / 2;
      for (size_t j = 0; j < sc.w.size(); ++j) {
        h = leaky_relu(conv1d(h, sc.w[j], sc.b[j], cfg_.stride, pad, pad),
                       static_cast<T>(0.2));
        out.features.push_back(h);
      }
      Var<T> map = conv1d(h, sc.head_w, sc.head_b, 1, 1, 1);
      out.score = reshape(mean_time(map), {map.shape()[0]});
      outs.push_back(std::move(out));
    }
    return outs;
  }

 private:
  struct Scale {
    Var<T> stem_w, stem_b, head_w, head_b;
    std::vector<Var<T>> w, b;
  };

  DiscriminatorConfig cfg_;
  Params<T> params_;
  std::vector<Scale> scales_;
};

}  // namespace conchshell
