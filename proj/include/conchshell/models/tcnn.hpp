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

// Image classifier whose per-block activations double as the visual features
// forged into a synthetic video clip for the audio pipeline.

#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/common.hpp"
#include "conchshell/conv_ops.hpp"
#include "conchshell/image_io.hpp"
#include "conchshell/nn.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {

struct TcnnConfig {
  size_t image_side = 224;
  size_t in_channels = 3;
  // Output width of each block; one 2x spatial downsample per block.
  std::vector<size_t> widths = {16, 32, 64, 64, 128, 128};
  // 3x3 convolutions per block, each followed by the rectifier.
  size_t convs_per_block = 1;
  size_t n_classes = 6;
};

template <typename T>
class Tcnn {
 public:
  Tcnn(const TcnnConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.widths.empty()) throw DataError("tcnn: no blocks configured");
    if (cfg_.convs_per_block != 1 && cfg_.convs_per_block != 3)
      throw DataError("tcnn: convs_per_block must be 1 or 3");
    size_t side = cfg_.image_side;
    size_t cin = cfg_.in_channels;
    for (size_t b = 0; b < cfg_.widths.size(); ++b) {
      if (side < 2) throw DataError("tcnn: image too small for block count");
      side /= 2;
      const size_t cout = cfg_.widths[b];
      Block blk;
      for (size_t j = 0; j < cfg_.convs_per_block; ++j) {
        const size_t ci = (j == 0) ? cin : cout;
        blk.w.push_back(params_.uniform(strf("block", b, ".conv", j, ".w"),
                                        {cout, ci, 3, 3}, ci * 9, rng));
        blk.b.push_back(
            params_.zeros(strf("block", b, ".conv", j, ".b"), {cout}));
      }
      blocks_.push_back(std::move(blk));
      cin = cout;
    }
    head_w_ = params_.uniform("head.w", {cfg_.n_classes, cin}, cin, rng);
    head_b_ = params_.zeros("head.b", {cfg_.n_classes});
  }

  const TcnnConfig& config() const { return cfg_; }
  Params<T>& params() { return params_; }
  const Params<T>& params() const { return params_; }

  // (N,C,S,S) -> (N,n_classes), differentiable.
  Var<T> logits(const Var<T>& images) const {
    Var<T> h = check_batch(images);
    for (const Block& blk : blocks_) {
      for (size_t j = 0; j < blk.w.size(); ++j)
        h = relu(conv2d(h, blk.w[j], blk.b[j], 1, 1));
      h = avg_pool2d(h, 2);
    }
    return linear(mean_hw(h), head_w_, head_b_);
  }

  // Single image (C,S,S) -> class probabilities (n_classes).
  Tensor<T> classify(const Tensor<T>& image) const {
    Var<T> p = softmax(logits(Var<T>::constant(batch_of_one(image))));
    Tensor<T> out({cfg_.n_classes});
    for (size_t i = 0; i < cfg_.n_classes; ++i) out[i] = p.value()[i];
    return out;
  }

  // Per-block activations of one image, pooled: element i has shape
  // (widths[i], S/2^(i+1), S/2^(i+1)).
  std::vector<Tensor<T>> extract_block_features(const Tensor<T>& image) const {
    Var<T> h = Var<T>::constant(batch_of_one(image));
    std::vector<Tensor<T>> feats;
    feats.reserve(blocks_.size());
    for (const Block& blk : blocks_) {
      for (size_t j = 0; j < blk.w.size(); ++j)
        h = relu(conv2d(h, blk.w[j], blk.b[j], 1, 1));
      h = avg_pool2d(h, 2);
      Tensor<T> f({h.shape()[1], h.shape()[2], h.shape()[3]});
      std::memcpy(f.data(), h.value().data(), sizeof(T) * f.numel());
      feats.push_back(std::move(f));
    }
    return feats;
  }

 private:
  struct Block {
    std::vector<Var<T>> w, b;
  };

  Tensor<T> batch_of_one(const Tensor<T>& image) const {
    if (image.rank() != 3 || image.dim(0) != cfg_.in_channels ||
        image.dim(1) != cfg_.image_side || image.dim(2) != cfg_.image_side)
      throw DataError(strf("tcnn: want image ", cfg_.in_channels, "x",
                           cfg_.image_side, "x", cfg_.image_side, ", got ",
                           Tensor<T>::shape_str(image.shape())));
    Tensor<T> x({1, image.dim(0), image.dim(1), image.dim(2)});
    std::memcpy(x.data(), image.data(), sizeof(T) * image.numel());
    return x;
  }

  Var<T> check_batch(const Var<T>& images) const {
    if (images.shape().size() != 4 || images.shape()[1] != cfg_.in_channels ||
        images.shape()[2] != cfg_.image_side ||
        images.shape()[3] != cfg_.image_side)
      throw DataError(strf("tcnn: want batch Nx", cfg_.in_channels, "x",
                           cfg_.image_side, "x", cfg_.image_side, ", got ",
                           Tensor<T>::shape_str(images.value().shape())));
    return images;
  }

  TcnnConfig cfg_;
  Params<T> params_;
  std::vector<Block> blocks_;
  Var<T> head_w_, head_b_;
};

// Builds the synthetic clip fed to the spatio-temporal encoder. Each of the
// six block feature maps is averaged over channels, bilinearly resized to
// side x side, and written as `copies` consecutive identical frames,
// replicated across `out_channels` channels. Output shape:
// (out_channels, copies * 6, side, side). Block order matters: block i owns
// frames [copies*i, copies*(i+1)).
template <typename T>
Tensor<T> forge_time_feature(const std::vector<Tensor<T>>& block_feats,
                             size_t side = 224, size_t copies = 3,
                             size_t out_channels = 3) {
  if (block_feats.size() != 6)
    throw DataError(strf("forge_time_feature: want 6 block features, got ",
                         block_feats.size()));
  const size_t frames = copies * block_feats.size();
  Tensor<T> out({out_channels, frames, side, side});
  for (size_t i = 0; i < block_feats.size(); ++i) {
    const Tensor<T>& f = block_feats[i];
    if (f.rank() != 3)
      throw DataError(strf("forge_time_feature: want (C,H,W) features, got ",
                           Tensor<T>::shape_str(f.shape())));
    const size_t C = f.dim(0), H = f.dim(1), W = f.dim(2);
    Tensor<T> m({1, H, W});
    for (size_t y = 0; y < H; ++y)
      for (size_t x = 0; x < W; ++x) {
        T acc = 0;
        for (size_t c = 0; c < C; ++c) acc += f.at(c, y, x);
        m.at(0, y, x) = acc / static_cast<T>(C);
      }
    const Tensor<T> up = resize_bilinear(m, side, side);
    for (size_t c = 0; c < out_channels; ++c)
      for (size_t r = 0; r < copies; ++r)
        std::memcpy(out.data() + ((c * frames + copies * i + r) * side * side),
                    up.data(), sizeof(T) * side * side);
  }
  return out;
}

}  // namespace conchshell
