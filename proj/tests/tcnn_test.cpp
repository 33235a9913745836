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

#include "conchshell/models/tcnn.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <vector>

#include "conchshell/rng.hpp"
#include "gradcheck.hpp"

namespace conchshell {
namespace {

Tensor<double> random_tensor(const std::vector<size_t>& shape, Rng* rng) {
  Tensor<double> t(shape);
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng->uniform(-1.0, 1.0);
  return t;
}

const Tensor<double>& named_param(const Params<double>& params,
                                  const std::string& name) {
  for (const auto& it : params.all())
    if (it.first == name) return it.second.value();
  throw Error("missing parameter " + name);
}

// Reference block: 3x3 conv (stride 1, pad 1) + rectifier + 2x2 mean pool,
// all loops direct.
Tensor<double> naive_block(const Tensor<double>& x, const Tensor<double>& w,
                           const Tensor<double>& b) {
  const int Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Co = w.dim(0);
  Tensor<double> conv({(size_t)Co, (size_t)H, (size_t)W});
  for (int co = 0; co < Co; ++co)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        double acc = b[co];
        for (int ci = 0; ci < Ci; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = y + ky - 1, sx = xx + kx - 1;
              if (sy >= 0 && sy < H && sx >= 0 && sx < W)
                acc += w.at(co, ci, ky, kx) * x.at(ci, sy, sx);
            }
        conv.at(co, y, xx) = std::max(0.0, acc);
      }
  const int Ho = H / 2, Wo = W / 2;
  Tensor<double> out({(size_t)Co, (size_t)Ho, (size_t)Wo});
  for (int co = 0; co < Co; ++co)
    for (int y = 0; y < Ho; ++y)
      for (int xx = 0; xx < Wo; ++xx)
        out.at(co, y, xx) =
            0.25 * (conv.at(co, 2 * y, 2 * xx) + conv.at(co, 2 * y, 2 * xx + 1) +
                    conv.at(co, 2 * y + 1, 2 * xx) +
                    conv.at(co, 2 * y + 1, 2 * xx + 1));
  return out;
}

// Reference channel mean + bilinear resize with half-pixel sample centers.
Tensor<double> naive_frame(const Tensor<double>& f, size_t side) {
  const size_t C = f.dim(0), H = f.dim(1), W = f.dim(2);
  Tensor<double> out({side, side});
  for (size_t i = 0; i < side; ++i)
    for (size_t j = 0; j < side; ++j) {
      double ty = std::clamp((i + 0.5) * H / side - 0.5, 0.0, double(H - 1));
      double tx = std::clamp((j + 0.5) * W / side - 0.5, 0.0, double(W - 1));
      const size_t y0 = (size_t)ty, x0 = (size_t)tx;
      const size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
      const double fy = ty - y0, fx = tx - x0;
      double acc = 0.0;
      for (size_t c = 0; c < C; ++c) {
        const double a = f.at(c, y0, x0), b = f.at(c, y0, x1);
        const double d = f.at(c, y1, x0), e = f.at(c, y1, x1);
        acc += (a + (b - a) * fx) * (1 - fy) + (d + (e - d) * fx) * fy;
      }
      out.at(i, j) = acc / C;
    }
  return out;
}

TEST(Tcnn, BlockFeatureShapesHalveEachStage) {
  Rng rng(1);
  TcnnConfig cfg;  // side 224, widths 16/32/64/64/128/128
  Tcnn<double> model(cfg, rng);
  Tensor<double> img = random_tensor({3, 224, 224}, &rng);
  const auto feats = model.extract_block_features(img);
  ASSERT_EQ(feats.size(), 6u);
  const size_t sides[] = {112, 56, 28, 14, 7, 3};
  for (size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(feats[i].dim(0), cfg.widths[i]);
    EXPECT_EQ(feats[i].dim(1), sides[i]);
    EXPECT_EQ(feats[i].dim(2), sides[i]);
  }
}

TEST(Tcnn, ClassifyReturnsNormalizedProbabilities) {
  Rng rng(2);
  TcnnConfig cfg;
  cfg.image_side = 32;
  cfg.widths = {4, 8, 8};
  Tcnn<double> model(cfg, rng);
  Tensor<double> img = random_tensor({3, 32, 32}, &rng);
  const Tensor<double> p = model.classify(img);
  ASSERT_EQ(p.numel(), cfg.n_classes);
  double total = 0.0;
  for (size_t i = 0; i < p.numel(); ++i) {
    EXPECT_GE(p[i], 0.0);
    total += p[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Tcnn, SameSeedSameImageGivesIdenticalOutputs) {
  TcnnConfig cfg;
  cfg.image_side = 16;
  cfg.widths = {4, 4};
  Rng rng_img(7);
  Tensor<double> img = random_tensor({3, 16, 16}, &rng_img);
  Rng r1(11), r2(11);
  Tcnn<double> m1(cfg, r1), m2(cfg, r2);
  const Tensor<double> p1 = m1.classify(img), p2 = m2.classify(img);
  for (size_t i = 0; i < p1.numel(); ++i) EXPECT_EQ(p1[i], p2[i]);
  const Tensor<double> again = m1.classify(img);
  for (size_t i = 0; i < p1.numel(); ++i) EXPECT_EQ(p1[i], again[i]);
}

TEST(Tcnn, ConvsPerBlockMustBeOneOrThree) {
  Rng rng(3);
  TcnnConfig cfg;
  cfg.image_side = 16;
  cfg.widths = {4, 4};
  cfg.convs_per_block = 2;
  EXPECT_THROW(Tcnn<double>(cfg, rng), DataError);
  cfg.convs_per_block = 1;
  EXPECT_NO_THROW(Tcnn<double>(cfg, rng));
  cfg.convs_per_block = 3;
  EXPECT_NO_THROW(Tcnn<double>(cfg, rng));
}

TEST(Tcnn, DeepVariantTriplesConvParameterCount) {
  TcnnConfig shallow;
  shallow.image_side = 16;
  shallow.widths = {4, 4};
  TcnnConfig deep = shallow;
  deep.convs_per_block = 3;
  Rng r1(4), r2(4);
  Tcnn<double> a(shallow, r1), b(deep, r2);
  // 6 blocks stay 6 blocks; only per-block conv count changes.
  EXPECT_EQ(a.extract_block_features(random_tensor({3, 16, 16}, &r1)).size(),
            shallow.widths.size());
  EXPECT_GT(model_stats(b.params()).parameters,
            model_stats(a.params()).parameters);
}

TEST(Tcnn, RejectsWrongImageShape) {
  Rng rng(5);
  TcnnConfig cfg;
  cfg.image_side = 16;
  cfg.widths = {4};
  Tcnn<double> model(cfg, rng);
  EXPECT_THROW(model.classify(random_tensor({3, 8, 8}, &rng)), DataError);
  EXPECT_THROW(model.classify(random_tensor({1, 16, 16}, &rng)), DataError);
  EXPECT_THROW(model.logits(Var<double>::constant(
                   random_tensor({2, 3, 16, 8}, &rng))),
               DataError);
}

TEST(Tcnn, BlockFeaturesMatchDirectConvolution) {
  Rng rng(6);
  TcnnConfig cfg;
  cfg.image_side = 12;
  cfg.widths = {2, 3};
  Tcnn<double> model(cfg, rng);
  Tensor<double> img = random_tensor({3, 12, 12}, &rng);
  const auto feats = model.extract_block_features(img);

  Tensor<double> h = img;
  for (size_t bidx = 0; bidx < cfg.widths.size(); ++bidx) {
    h = naive_block(h, named_param(model.params(), strf("block", bidx,
                                                        ".conv0.w")),
                    named_param(model.params(), strf("block", bidx,
                                                     ".conv0.b")));
    ASSERT_EQ(feats[bidx].shape(), h.shape());
    for (size_t i = 0; i < h.numel(); ++i)
      EXPECT_NEAR(feats[bidx][i], h[i], 1e-12);
  }
}

TEST(Tcnn, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  TcnnConfig cfg;
  cfg.image_side = 8;
  cfg.widths = {2, 2};
  cfg.n_classes = 3;
  Tcnn<double> model(cfg, rng);
  Tensor<double> img = random_tensor({2, 3, 8, 8}, &rng);
  testing::check_gradients(
      model.params().vars(), std::function<Var<double>()>([&] {
        Var<double> lg = model.logits(Var<double>::constant(img));
        return mean(mul(lg, lg));
      }));
}

TEST(ForgeTimeFeature, ShapeAndTripleReplication) {
  Rng rng(9);
  std::vector<Tensor<double>> feats;
  const size_t chans[] = {2, 3, 4, 4, 5, 5};
  const size_t sides[] = {16, 8, 4, 2, 2, 1};
  for (size_t i = 0; i < 6; ++i)
    feats.push_back(random_tensor({chans[i], sides[i], sides[i]}, &rng));
  const size_t side = 32;
  const Tensor<double> out = forge_time_feature(feats, side);
  ASSERT_EQ(out.shape(), (std::vector<size_t>{3, 18, side, side}));
  for (size_t c = 0; c < 3; ++c)
    for (size_t i = 0; i < 6; ++i) {
      const double* first = out.data() + (c * 18 + 3 * i) * side * side;
      for (size_t r = 1; r < 3; ++r)
        EXPECT_EQ(std::memcmp(first, first + r * side * side,
                              sizeof(double) * side * side),
                  0)
            << "frames of block " << i << " differ";
    }
  // All channels carry the same replicated frame.
  EXPECT_EQ(std::memcmp(out.data(), out.data() + 18 * side * side,
                        sizeof(double) * 18 * side * side),
            0);
}

TEST(ForgeTimeFeature, ConstantFeaturesStayConstant) {
  std::vector<Tensor<double>> feats;
  for (size_t i = 0; i < 6; ++i) {
    Tensor<double> f({3, 4 + i, 4 + i});
    for (size_t j = 0; j < f.numel(); ++j) f[j] = 0.625;
    feats.push_back(std::move(f));
  }
  const Tensor<double> out = forge_time_feature(feats, 16);
  for (size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out[i], 0.625, 1e-12);
}

TEST(ForgeTimeFeature, FrameEqualsChannelMeanPlusBilinearResize) {
  Rng rng(10);
  std::vector<Tensor<double>> feats;
  const size_t chans[] = {2, 3, 4, 4, 5, 5};
  const size_t sides[] = {12, 6, 5, 3, 2, 1};
  for (size_t i = 0; i < 6; ++i)
    feats.push_back(random_tensor({chans[i], sides[i], sides[i]}, &rng));
  const size_t side = 24;
  const Tensor<double> out = forge_time_feature(feats, side);
  for (size_t i = 0; i < 6; ++i) {
    const Tensor<double> want = naive_frame(feats[i], side);
    const double* got = out.data() + (3 * i) * side * side;
    for (size_t j = 0; j < side * side; ++j)
      EXPECT_NEAR(got[j], want[j], 1e-12) << "block " << i << " pixel " << j;
  }
}

TEST(ForgeTimeFeature, PermutingInputsPermutesFrameTriples) {
  Rng rng(12);
  std::vector<Tensor<double>> feats;
  for (size_t i = 0; i < 6; ++i)
    feats.push_back(random_tensor({2, 4, 4}, &rng));
  const size_t perm[] = {3, 0, 5, 1, 4, 2};
  std::vector<Tensor<double>> shuffled;
  for (size_t i = 0; i < 6; ++i) shuffled.push_back(feats[perm[i]]);
  const size_t side = 8;
  const Tensor<double> base = forge_time_feature(feats, side);
  const Tensor<double> moved = forge_time_feature(shuffled, side);
  for (size_t i = 0; i < 6; ++i)
    EXPECT_EQ(std::memcmp(moved.data() + (3 * i) * side * side,
                          base.data() + (3 * perm[i]) * side * side,
                          sizeof(double) * 3 * side * side),
              0);
}

TEST(ForgeTimeFeature, RejectsAnythingButSixFeatureMaps) {
  Rng rng(13);
  EXPECT_THROW(forge_time_feature(std::vector<Tensor<double>>{}, 8),
               DataError);
  std::vector<Tensor<double>> five;
  for (size_t i = 0; i < 5; ++i) five.push_back(random_tensor({2, 4, 4}, &rng));
  EXPECT_THROW(forge_time_feature(five, 8), DataError);
  five.push_back(random_tensor({2, 4, 4}, &rng));
  EXPECT_NO_THROW(forge_time_feature(five, 8));
}

}  // namespace
}  // namespace conchshell
