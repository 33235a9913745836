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

// Waveform codec with a vector-quantized latent space. Three temporal
// resolutions are supported; the hop is the number of audio samples covered
// by one latent column.

#pragma once

#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/common.hpp"
#include "conchshell/conv_ops.hpp"
#include "conchshell/nn.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {

enum class CodecLevel { kHigh, kLow, kDeep };

inline size_t codec_hop(CodecLevel level) {
  switch (level) {
    case CodecLevel::kHigh: return 128;
    case CodecLevel::kLow: return 32;
    case CodecLevel::kDeep: return 8;
  }
  throw Error("codec_hop: bad level");
}

inline const char* codec_level_name(CodecLevel level) {
  switch (level) {
    case CodecLevel::kHigh: return "high";
    case CodecLevel::kLow: return "low";
    case CodecLevel::kDeep: return "deep";
  }
  throw Error("codec_level_name: bad level");
}

inline CodecLevel codec_level_from_string(const std::string& s) {
  if (s == "high") return CodecLevel::kHigh;
  if (s == "low") return CodecLevel::kLow;
  if (s == "deep") return CodecLevel::kDeep;
  throw DataError(strf("unknown codec level '", s, "'"));
}

// Per-stage temporal strides; their product is the hop.
inline std::vector<size_t> codec_strides(CodecLevel level) {
  switch (level) {
    case CodecLevel::kHigh: return {8, 4, 4};
    case CodecLevel::kLow: return {8, 4};
    case CodecLevel::kDeep: return {4, 2};
  }
  throw Error("codec_strides: bad level");
}

struct VqCodecConfig {
  CodecLevel level = CodecLevel::kDeep;
  size_t d_lat = 64;
  size_t codebook_size = 512;
  size_t width = 32;
};

// Nearest codebook entry per latent column, squared-L2 metric. Ties resolve
// to the lowest index. latents: (D,T); codebook: (K,D). Returns the code per
// column and the quantized latents (D,T).
template <typename T>
std::pair<Tensor<int>, Tensor<T>> quantize(const Tensor<T>& latents,
                                           const Tensor<T>& codebook) {
  if (latents.rank() != 2 || codebook.rank() != 2 ||
      latents.dim(0) != codebook.dim(1))
    throw DataError(strf("quantize: latents ",
                         Tensor<T>::shape_str(latents.shape()),
                         " vs codebook ",
                         Tensor<T>::shape_str(codebook.shape())));
  const size_t D = latents.dim(0), Tn = latents.dim(1), K = codebook.dim(0);
  Tensor<int> codes({Tn});
  Tensor<T> q({D, Tn});
  for (size_t t = 0; t < Tn; ++t) {
    size_t best = 0;
    T best_d = 0;
    for (size_t k = 0; k < K; ++k) {
      T d = 0;
      const T* e = codebook.data() + k * D;
      for (size_t i = 0; i < D; ++i) {
        const T diff = latents.at(i, t) - e[i];
        d += diff * diff;
      }
      if (k == 0 || d < best_d) {
        best_d = d;
        best = k;
      }
    }
    codes[t] = static_cast<int>(best);
    const T* e = codebook.data() + best * D;
    for (size_t i = 0; i < D; ++i) q.at(i, t) = e[i];
  }
  return {std::move(codes), std::move(q)};
}

// Batch variant: latents (N,D,T) -> codes (N,T), quantized (N,D,T).
template <typename T>
std::pair<Tensor<int>, Tensor<T>> quantize_batch(const Tensor<T>& latents,
                                                 const Tensor<T>& codebook) {
  if (latents.rank() != 3)
    throw DataError("quantize_batch: want latents (N,D,T)");
  const size_t N = latents.dim(0), D = latents.dim(1), Tn = latents.dim(2);
  Tensor<int> codes({N, Tn});
  Tensor<T> q({N, D, Tn});
  for (size_t n = 0; n < N; ++n) {
    Tensor<T> item({D, Tn});
    std::memcpy(item.data(), latents.data() + n * D * Tn,
                sizeof(T) * D * Tn);
    auto [c, z] = quantize(item, codebook);
    std::memcpy(codes.data() + n * Tn, c.data(), sizeof(int) * Tn);
    std::memcpy(q.data() + n * D * Tn, z.data(), sizeof(T) * D * Tn);
  }
  return {std::move(codes), std::move(q)};
}

// Straight-through estimator: value equals `quantized`, gradient passes to
// `latents` unchanged.
template <typename T>
Var<T> straight_through(const Var<T>& latents, const Tensor<T>& quantized) {
  if (latents.shape() != quantized.shape())
    throw DataError("straight_through: shape mismatch");
  Tensor<T> delta(quantized.shape());
  for (size_t i = 0; i < delta.numel(); ++i)
    delta[i] = quantized[i] - latents.value()[i];
  return add(latents, Var<T>::constant(std::move(delta)));
}

template <typename T>
class VqCodec {
 public:
  VqCodec(const VqCodecConfig& cfg, Rng& rng)
      : cfg_(cfg), strides_(codec_strides(cfg.level)) {
    size_t cin = 1;
    for (size_t i = 0; i < strides_.size(); ++i) {
      const size_t k = 2 * strides_[i];
      enc_w_.push_back(params_.uniform(strf("enc", i, ".w"),
                                       {cfg_.width, cin, k}, cin * k, rng));
      enc_b_.push_back(params_.zeros(strf("enc", i, ".b"), {cfg_.width}));
      cin = cfg_.width;
    }
    enc_out_w_ = params_.uniform("enc_out.w", {cfg_.d_lat, cfg_.width, 1},
                                 cfg_.width, rng);
    enc_out_b_ = params_.zeros("enc_out.b", {cfg_.d_lat});
    dec_in_w_ = params_.uniform("dec_in.w", {cfg_.width, cfg_.d_lat, 1},
                                cfg_.d_lat, rng);
    dec_in_b_ = params_.zeros("dec_in.b", {cfg_.width});
    for (size_t i = 0; i < strides_.size(); ++i) {
      const size_t s = strides_[strides_.size() - 1 - i];
      const size_t k = 2 * s;
      dec_w_.push_back(params_.uniform(strf("dec", i, ".w"),
                                       {cfg_.width, cfg_.width, k},
                                       cfg_.width * k, rng));
      dec_b_.push_back(params_.zeros(strf("dec", i, ".b"), {cfg_.width}));
    }
    dec_out_w_ =
        params_.uniform("dec_out.w", {1, cfg_.width, 1}, cfg_.width, rng);
    dec_out_b_ = params_.zeros("dec_out.b", {1});
    codebook_ = params_.uniform("codebook", {cfg_.codebook_size, cfg_.d_lat},
                                cfg_.d_lat, rng);
  }

  const VqCodecConfig& config() const { return cfg_; }
  size_t hop() const { return codec_hop(cfg_.level); }
  CodecLevel level() const { return cfg_.level; }
  Params<T>& params() { return params_; }
  const Params<T>& params() const { return params_; }
  const Var<T>& codebook() const { return codebook_; }

  // (N,1,L) -> (N,d_lat,L/hop). L must divide evenly by the hop.
  Var<T> encode(const Var<T>& x) const {
    if (x.shape().size() != 3 || x.shape()[1] != 1)
      throw DataError(strf("codec encode: want (N,1,L), got ",
                           Tensor<T>::shape_str(x.value().shape())));
    if (x.shape()[2] == 0 || x.shape()[2] % hop() != 0)
      throw DataError(strf("codec encode: length ", x.shape()[2],
                           " not divisible by hop ", hop()));
    Var<T> h = x;
    for (size_t i = 0; i < strides_.size(); ++i) {
      const size_t s = strides_[i];
      h = leaky_relu(conv1d(h, enc_w_[i], enc_b_[i], s, s / 2, s - s / 2),
                     static_cast<T>(0.2));
    }
    return conv1d(h, enc_out_w_, enc_out_b_, 1, 0, 0);
  }

  // (N,d_lat,T) -> (N,1,T*hop), bounded by the final saturation.
  Var<T> decode(const Var<T>& z) const {
    if (z.shape().size() != 3 || z.shape()[1] != cfg_.d_lat)
      throw DataError(strf("codec decode: want (N,", cfg_.d_lat, ",T), got ",
                           Tensor<T>::shape_str(z.value().shape())));
    Var<T> h = leaky_relu(conv1d(z, dec_in_w_, dec_in_b_, 1, 0, 0),
                          static_cast<T>(0.2));
    for (size_t i = 0; i < dec_w_.size(); ++i) {
      const size_t s = strides_[strides_.size() - 1 - i];
      h = leaky_relu(conv_transpose1d(h, dec_w_[i], dec_b_[i], s, s / 2),
                     static_cast<T>(0.2));
    }
    return tanh(conv1d(h, dec_out_w_, dec_out_b_, 1, 0, 0));
  }

  // Waveform (L) -> latents (d_lat, L/hop), values only.
  Tensor<T> encode_tensor(const Tensor<T>& wave) const {
    if (wave.rank() != 1) throw DataError("codec encode: want waveform (L)");
    Tensor<T> x({1, 1, wave.numel()});
    std::memcpy(x.data(), wave.data(), sizeof(T) * wave.numel());
    Var<T> z = encode(Var<T>::constant(std::move(x)));
    Tensor<T> out({z.shape()[1], z.shape()[2]});
    std::memcpy(out.data(), z.value().data(), sizeof(T) * out.numel());
    return out;
  }

  // Latents (d_lat,T) -> waveform (T*hop), values only.
  Tensor<T> decode_tensor(const Tensor<T>& latents) const {
    if (latents.rank() != 2)
      throw DataError("codec decode: want latents (D,T)");
    Tensor<T> z({1, latents.dim(0), latents.dim(1)});
    std::memcpy(z.data(), latents.data(), sizeof(T) * latents.numel());
    Var<T> y = decode(Var<T>::constant(std::move(z)));
    Tensor<T> out({y.shape()[2]});
    std::memcpy(out.data(), y.value().data(), sizeof(T) * out.numel());
    return out;
  }

 private:
  VqCodecConfig cfg_;
  std::vector<size_t> strides_;
  Params<T> params_;
  std::vector<Var<T>> enc_w_, enc_b_, dec_w_, dec_b_;
  Var<T> enc_out_w_, enc_out_b_, dec_in_w_, dec_in_b_;
  Var<T> dec_out_w_, dec_out_b_;
  Var<T> codebook_;
};

}  // namespace conchshell
