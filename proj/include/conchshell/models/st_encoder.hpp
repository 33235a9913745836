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

// Spatio-temporal encoder: 3-D convolution stages that squeeze the forged
// clip into one feature vector per frame. Spatial extent shrinks 2x per
// stage; the temporal axis is never downsampled.

#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/common.hpp"
#include "conchshell/conv_ops.hpp"
#include "conchshell/nn.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {

struct StEncoderConfig {
  size_t in_channels = 3;
  size_t t_frames = 18;
  size_t image_side = 224;
  // Stage widths; the last entry is the embedding size per frame.
  std::vector<size_t> widths = {32, 64, 128, 256};
};

template <typename T>
class StEncoder {
 public:
  StEncoder(const StEncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.widths.empty()) throw DataError("st_encoder: no stages");
    size_t cin = cfg_.in_channels;
    for (size_t i = 0; i < cfg_.widths.size(); ++i) {
      const size_t cout = cfg_.widths[i];
      w_.push_back(params_.uniform(strf("stage", i, ".w"),
                                   {cout, cin, 3, 3, 3}, cin * 27, rng));
      b_.push_back(params_.zeros(strf("stage", i, ".b"), {cout}));
      cin = cout;
    }
  }

  const StEncoderConfig& config() const { return cfg_; }
  size_t d_st() const { return cfg_.widths.back(); }
  Params<T>& params() { return params_; }
  const Params<T>& params() const { return params_; }

  // (N,C,T,S,S) -> (N,d_st,T), differentiable.
  Var<T> forward(const Var<T>& clips) const {
    if (clips.shape().size() != 5 || clips.shape()[1] != cfg_.in_channels ||
        clips.shape()[2] != cfg_.t_frames ||
        clips.shape()[3] != cfg_.image_side ||
        clips.shape()[4] != cfg_.image_side)
      throw DataError(strf("st_encoder: want clips Nx", cfg_.in_channels, "x",
                           cfg_.t_frames, "x", cfg_.image_side, "x",
                           cfg_.image_side, ", got ",
                           Tensor<T>::shape_str(clips.value().shape())));
    Var<T> h = clips;
    for (size_t i = 0; i < w_.size(); ++i)
      h = leaky_relu(conv3d(h, w_[i], b_[i], 1, 2, 2, 1, 1, 1),
                     static_cast<T>(0.2));
    return mean_hw3d(h);
  }

  // Single clip (C,T,S,S) -> (d_st,T), values only.
  Tensor<T> encode(const Tensor<T>& clip) const {
    if (clip.rank() != 4)
      throw DataError(strf("st_encoder: want clip (C,T,S,S), got ",
                           Tensor<T>::shape_str(clip.shape())));
    Tensor<T> x({1, clip.dim(0), clip.dim(1), clip.dim(2), clip.dim(3)});
    std::memcpy(x.data(), clip.data(), sizeof(T) * clip.numel());
    Var<T> out = forward(Var<T>::constant(std::move(x)));
    Tensor<T> f({out.shape()[1], out.shape()[2]});
    std::memcpy(f.data(), out.value().data(), sizeof(T) * f.numel());
    return f;
  }

 private:
  StEncoderConfig cfg_;
  Params<T> params_;
  std::vector<Var<T>> w_, b_;
};

}  // namespace conchshell
