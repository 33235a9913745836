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

#include "conchshell/models/gan.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <functional>
#include <string>
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

void zero_params_matching(Params<double>& params, const std::string& infix) {
  for (const auto& it : params.all())
    if (it.first.find(infix) != std::string::npos) {
      Tensor<double>& v = it.second.mutable_value();
      for (size_t i = 0; i < v.numel(); ++i) v[i] = 0.0;
    }
}

GeneratorConfig tiny_gen_config(size_t upsample_stages) {
  GeneratorConfig cfg;
  cfg.d_st = 3;
  cfg.d_lat = 2;
  cfg.width = 4;
  cfg.upsample_stages = upsample_stages;
  cfg.res_kernel = 6;
  cfg.n_res_blocks = 1;
  cfg.stage_kernel = 3;
  return cfg;
}

TEST(ResBlock, ZeroWeightsActAsIdentity) {
  Rng rng(51);
  Params<double> params;
  ResBlock1d<double> blk(params, "rb", 3, 5, rng);
  zero_params_matching(params, ".w");
  Tensor<double> x = random_tensor({2, 3, 7}, &rng);
  Var<double> y = blk.forward(Var<double>::constant(x));
  ASSERT_EQ(y.shape(), x.shape());
  for (size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.value()[i], x[i]);
}

TEST(Generator, DefaultConfigKeepsLongKernel) {
  GeneratorConfig cfg;
  EXPECT_EQ(cfg.res_kernel, 40u);
  EXPECT_GE(cfg.n_res_blocks, 1u);
  EXPECT_EQ(generator_upsample_stages(CodecLevel::kHigh), 0u);
  EXPECT_EQ(generator_upsample_stages(CodecLevel::kLow), 2u);
  EXPECT_EQ(generator_upsample_stages(CodecLevel::kDeep), 4u);
}

TEST(Generator, OutputShapeFollowsUpsampleFactor) {
  Rng rng(52);
  for (size_t stages : {0u, 2u, 4u}) {
    Generator<double> gen(tiny_gen_config(stages), rng);
    EXPECT_EQ(gen.upsample_factor(), size_t(1) << stages);
    Var<double> st = Var<double>::constant(random_tensor({2, 3, 5}, &rng));
    Var<double> z = gen.forward(st, 16);
    EXPECT_EQ(z.shape(), (std::vector<size_t>{2, 2, 16}));
  }
}

TEST(Generator, DeepPresetReachesEightSecondLatentGrid) {
  Rng rng(53);
  GeneratorConfig cfg = tiny_gen_config(generator_upsample_stages(
      CodecLevel::kDeep));
  cfg.d_lat = 64;
  Generator<double> gen(cfg, rng);
  // 8 s at 16 kHz through the deep hop (8) is a 16000-step latent grid.
  Var<double> st = Var<double>::constant(random_tensor({1, 3, 18}, &rng));
  Var<double> z = gen.forward(st, 16000);
  EXPECT_EQ(z.shape(), (std::vector<size_t>{1, 64, 16000}));
}

TEST(Generator, RejectsBadShapesAndLengths) {
  Rng rng(54);
  Generator<double> gen(tiny_gen_config(2), rng);
  Var<double> st = Var<double>::constant(random_tensor({1, 3, 5}, &rng));
  EXPECT_THROW(gen.forward(st, 0), DataError);
  EXPECT_THROW(gen.forward(st, 18), DataError);  // not divisible by 4
  Var<double> bad = Var<double>::constant(random_tensor({1, 5, 4}, &rng));
  EXPECT_THROW(gen.forward(bad, 16), DataError);
}

TEST(Generator, ZeroInputZeroBiasesGiveZeroOutput) {
  Rng rng(55);
  Generator<double> gen(tiny_gen_config(2), rng);
  Var<double> st = Var<double>::constant(Tensor<double>({1, 3, 5}));
  Var<double> z = gen.forward(st, 8);
  for (size_t i = 0; i < z.numel(); ++i) EXPECT_EQ(z.value()[i], 0.0);
}

TEST(Generator, SameSeedSameInputGiveIdenticalOutputs) {
  Rng ra(56), rb(56), rx(57);
  Generator<double> a(tiny_gen_config(1), ra), b(tiny_gen_config(1), rb);
  Tensor<double> st = random_tensor({1, 3, 4}, &rx);
  Var<double> za = a.forward(Var<double>::constant(st), 8);
  Var<double> zb = b.forward(Var<double>::constant(st), 8);
  Var<double> za2 = a.forward(Var<double>::constant(st), 8);
  for (size_t i = 0; i < za.numel(); ++i) {
    EXPECT_EQ(za.value()[i], zb.value()[i]);
    EXPECT_EQ(za.value()[i], za2.value()[i]);
  }
}

TEST(Generator, ScaleWeightsMultipliesEveryParameter) {
  Rng rng(58);
  Generator<double> gen(tiny_gen_config(1), rng);
  std::vector<std::pair<std::string, Tensor<double>>> before;
  for (const auto& it : gen.params().all())
    before.emplace_back(it.first, it.second.value());
  gen.scale_weights(2.0);
  size_t idx = 0;
  for (const auto& it : gen.params().all()) {
    const Tensor<double>& old = before[idx++].second;
    for (size_t i = 0; i < old.numel(); ++i)
      EXPECT_EQ(it.second.value()[i], 2.0 * old[i]);
  }
}

TEST(Generator, GradientsMatchFiniteDifferences) {
  Rng rng(59);
  GeneratorConfig cfg = tiny_gen_config(1);
  cfg.width = 3;
  cfg.res_kernel = 4;
  Generator<double> gen(cfg, rng);
  Tensor<double> st = random_tensor({1, 3, 3}, &rng);
  testing::check_gradients(
      gen.params().vars(), std::function<Var<double>()>([&] {
        Var<double> z = gen.forward(Var<double>::constant(st), 4);
        return mean(mul(z, z));
      }));
}

DiscriminatorConfig tiny_disc_config() {
  DiscriminatorConfig cfg;
  cfg.d_lat = 2;
  cfg.width = 3;
  cfg.n_scales = 3;
  cfg.n_strided = 1;
  cfg.stride = 2;
  return cfg;
}

TEST(Discriminator, EmitsOneScorePerScaleWithLayerFeatures) {
  Rng rng(61);
  MultiScaleDiscriminator<double> disc(tiny_disc_config(), rng);
  Var<double> z = Var<double>::constant(random_tensor({2, 2, 16}, &rng));
  const auto outs = disc.forward(z);
  ASSERT_EQ(outs.size(), 3u);
  for (const auto& out : outs) {
    EXPECT_EQ(out.score.shape(), (std::vector<size_t>{2}));
    EXPECT_EQ(out.features.size(), 2u);  // stem + one strided layer
  }
}

TEST(Discriminator, ScaleInputsEqualDirectAveragePooling) {
  Rng rng(62);
  MultiScaleDiscriminator<double> disc(tiny_disc_config(), rng);
  // Make the stem of every scale a center-tap pass-through of channel 0 so
  // its first feature map exposes the pooled input directly.
  zero_params_matching(disc.params(), "stem.w");
  for (const auto& it : disc.params().all())
    if (it.first.find("stem.w") != std::string::npos)
      it.second.mutable_value().at(0, 0, 7) = 1.0;

  Tensor<double> z({1, 2, 16});
  for (size_t i = 0; i < z.numel(); ++i) z[i] = 0.05 + 0.01 * i;  // positive
  const auto outs = disc.forward(Var<double>::constant(z));
  for (size_t k = 0; k < 3; ++k) {
    const size_t pool = size_t(1) << k;
    const size_t Lo = 16 / pool;
    const Tensor<double>& f = outs[k].features[0].value();
    ASSERT_EQ(f.dim(2), Lo);
    for (size_t t = 0; t < Lo; ++t) {
      double want = 0.0;
      for (size_t j = 0; j < pool; ++j) want += z.at(0, 0, t * pool + j);
      want /= pool;
      EXPECT_NEAR(f.at(0, 0, t), want, 1e-12) << "scale " << k;
    }
  }
}

TEST(Discriminator, PooledScalesPreserveTimeMean) {
  Rng rng(63);
  Tensor<double> z = random_tensor({2, 3, 16}, &rng);
  Var<double> zv = Var<double>::constant(z);
  for (size_t k = 0; k < 3; ++k) {
    Var<double> pooled = k == 0 ? zv : avg_pool1d(zv, size_t(1) << k);
    const size_t Lo = pooled.shape()[2];
    for (size_t n = 0; n < 2; ++n)
      for (size_t c = 0; c < 3; ++c) {
        double a = 0.0, b = 0.0;
        for (size_t t = 0; t < 16; ++t) a += z.at(n, c, t);
        for (size_t t = 0; t < Lo; ++t) b += pooled.value().at(n, c, t);
        EXPECT_NEAR(a / 16, b / Lo, 1e-12);
      }
  }
}

TEST(Discriminator, ZeroInputZeroBiasesGiveZeroScores) {
  Rng rng(64);
  MultiScaleDiscriminator<double> disc(tiny_disc_config(), rng);
  Var<double> z = Var<double>::constant(Tensor<double>({1, 2, 16}));
  for (const auto& out : disc.forward(z))
    EXPECT_EQ(out.score.value()[0], 0.0);
}

TEST(Discriminator, InputShorterThanPoolingFootprintThrows) {
  Rng rng(65);
  MultiScaleDiscriminator<double> disc(tiny_disc_config(), rng);
  Var<double> z = Var<double>::constant(random_tensor({1, 2, 2}, &rng));
  EXPECT_THROW(disc.forward(z), DataError);  // scale 2 pools by 4
  Var<double> bad = Var<double>::constant(random_tensor({1, 3, 16}, &rng));
  EXPECT_THROW(disc.forward(bad), DataError);
}

TEST(Discriminator, GradientsMatchFiniteDifferences) {
  Rng rng(66);
  DiscriminatorConfig cfg = tiny_disc_config();
  cfg.n_scales = 2;
  MultiScaleDiscriminator<double> disc(cfg, rng);
  Tensor<double> z = random_tensor({1, 2, 8}, &rng);
  testing::check_gradients(
      disc.params().vars(), std::function<Var<double>()>([&] {
        const auto outs = disc.forward(Var<double>::constant(z));
        Var<double> total = sum(outs[0].score);
        for (size_t k = 1; k < outs.size(); ++k)
          total = add(total, sum(outs[k].score));
        return total;
      }));
}

TEST(ModelStats, CountsTinyLayersExactly) {
  Rng rng(67);
  Params<double> conv;
  conv.uniform("w", {1, 1, 3, 3}, 9, rng);
  conv.zeros("b", {1});
  EXPECT_EQ(model_stats(conv).parameters, 10u);
  EXPECT_EQ(model_stats(conv).trainable, 10u);

  Params<double> lin;
  lin.uniform("w", {5, 4}, 4, rng);
  lin.zeros("b", {5});
  EXPECT_EQ(model_stats(lin).parameters, 25u);

  lin.freeze();
  EXPECT_EQ(model_stats(lin).parameters, 25u);
  EXPECT_EQ(model_stats(lin).trainable, 0u);
}

TEST(ModelStats, GeneratorMatchesPerLayerArithmetic) {
  Rng rng(68);
  GeneratorConfig cfg;
  cfg.d_st = 3;
  cfg.d_lat = 4;
  cfg.width = 5;
  cfg.upsample_stages = 2;
  cfg.res_kernel = 7;
  cfg.n_res_blocks = 2;
  cfg.stage_kernel = 3;
  Generator<double> gen(cfg, rng);
  const size_t w = cfg.width;
  const size_t res_block = 2 * (w * w * cfg.res_kernel + w);
  const size_t stage_block = 2 * (w * w * cfg.stage_kernel + w);
  const size_t want = (w * cfg.d_st + w)                       // input proj
                      + cfg.n_res_blocks * res_block           // base stack
                      + cfg.upsample_stages *
                            (w * w * 4 + w + stage_block)      // upsampling
                      + (cfg.d_lat * w + cfg.d_lat);           // output proj
  EXPECT_EQ(model_stats(gen.params()).parameters, want);
  EXPECT_EQ(model_stats(gen.params()).trainable, want);
}

}  // namespace
}  // namespace conchshell
