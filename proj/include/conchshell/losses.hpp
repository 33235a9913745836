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

// Training objectives. Every function returns a scalar Var so the pieces can
// be combined, logged, and backpropagated through one graph.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/common.hpp"
#include "conchshell/dsp/stft.hpp"

namespace conchshell {

struct LossWeights {
  double lambda_gen = 0.5;
  double lambda_fm = 3.0;
  double lambda_wave = 40.0;
  double lambda_mel = 15.0;
};

// Scalar values of every objective evaluated for one step, for logging.
// l_cs is always the weighted combination of the four generator terms.
struct LossReport {
  double l_d = 0.0;
  double l_g = 0.0;
  double l_fm = 0.0;
  double l_wave = 0.0;
  double l_mel = 0.0;
  double l_cs = 0.0;
};

namespace detail {

template <typename T>
T checked_scalar(const Var<T>& v, const char* term) {
  if (!v.defined() || v.numel() != 1)
    throw Error(std::string(term) + ": expected a scalar loss");
  const T s = v.value()[0];
  if (!std::isfinite(static_cast<double>(s)))
    throw NumericError(std::string(term) + ": non-finite value");
  return s;
}

// The hinge's max(0, .) would silently mask non-finite scores, so they are
// rejected before entering the objective.
template <typename T>
void require_finite(const Var<T>& v, const char* term) {
  for (size_t i = 0; i < v.value().numel(); ++i)
    if (!std::isfinite(static_cast<double>(v.value()[i])))
      throw NumericError(std::string(term) + ": non-finite value");
}

}  // namespace detail

// Mean of scalar Vars: (1/n) sum_i xs[i]. Used to batch-average per-item
// losses, which keeps the batch loss equal to the mean of item losses.
template <typename T>
Var<T> average(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw DataError("average: empty list");
  Var<T> acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return scale(acc, T(1) / static_cast<T>(xs.size()));
}

// Hinge objective for the discriminator over all scales:
//   sum_k mean_n max(0, 1 - real_k) + sum_k mean_n max(0, 1 + fake_k).
// Each entry holds the per-item scores of one scale; the mean over items
// implements batch averaging.
template <typename T>
Var<T> disc_loss(const std::vector<Var<T>>& real_scores,
                 const std::vector<Var<T>>& fake_scores) {
  if (real_scores.empty() || real_scores.size() != fake_scores.size())
    throw DataError("disc_loss: need matching per-scale score lists");
  Var<T> total;
  for (size_t k = 0; k < real_scores.size(); ++k) {
    detail::require_finite(real_scores[k], "disc_loss");
    detail::require_finite(fake_scores[k], "disc_loss");
    Var<T> r = mean(relu(affine(real_scores[k], T(-1), T(1))));
    Var<T> f = mean(relu(affine(fake_scores[k], T(1), T(1))));
    Var<T> part = add(r, f);
    total = total.defined() ? add(total, part) : part;
  }
  detail::checked_scalar(total, "disc_loss");
  return total;
}

// Generator adversarial objective: sum_k mean_n (-fake_k).
template <typename T>
Var<T> gen_loss(const std::vector<Var<T>>& fake_scores) {
  if (fake_scores.empty()) throw DataError("gen_loss: no scores");
  Var<T> total;
  for (const auto& f : fake_scores) {
    detail::require_finite(f, "gen_loss");
    Var<T> part = mean(neg(f));
    total = total.defined() ? add(total, part) : part;
  }
  detail::checked_scalar(total, "gen_loss");
  return total;
}

// Feature matching: mean over scales of the summed per-layer mean absolute
// differences. Real features should be detached by the caller; gradients then
// flow only through the fake branch.
template <typename T>
Var<T> feature_matching_loss(
    const std::vector<std::vector<Var<T>>>& real_feats,
    const std::vector<std::vector<Var<T>>>& fake_feats) {
  if (real_feats.empty() || real_feats.size() != fake_feats.size())
    throw DataError("feature_matching_loss: scale count mismatch");
  Var<T> total;
  for (size_t s = 0; s < real_feats.size(); ++s) {
    if (real_feats[s].empty() || real_feats[s].size() != fake_feats[s].size())
      throw DataError("feature_matching_loss: layer count mismatch");
    Var<T> per_scale;
    for (size_t i = 0; i < real_feats[s].size(); ++i) {
      Var<T> d = mean_abs_diff(real_feats[s][i], fake_feats[s][i]);
      per_scale = per_scale.defined() ? add(per_scale, d) : d;
    }
    total = total.defined() ? add(total, per_scale) : per_scale;
  }
  total = scale(total, T(1) / static_cast<T>(real_feats.size()));
  detail::checked_scalar(total, "feature_matching_loss");
  return total;
}

// Mean absolute difference between two waveforms of equal length.
template <typename T>
Var<T> wave_loss(const Var<T>& fake_wave, const Var<T>& real_wave) {
  Var<T> total = mean_abs_diff(fake_wave, real_wave);
  detail::checked_scalar(total, "wave_loss");
  return total;
}

// Mean absolute difference between the log-mel spectrograms of two waveforms.
template <typename T>
Var<T> mel_loss(const Var<T>& fake_wave, const Var<T>& real_wave,
                const MelComputer& mel) {
  Var<T> total =
      mean_abs_diff(mel_spectrogram(fake_wave, mel),
                    mel_spectrogram(real_wave, mel));
  detail::checked_scalar(total, "mel_loss");
  return total;
}

// Weighted combination driving the generator update:
//   l_cs = lambda_gen*l_g + lambda_fm*l_fm + lambda_wave*l_wave
//        + lambda_mel*l_mel.
// When `report` is given, its fields are filled with the same arithmetic so
// the logged l_cs matches the backpropagated value exactly.
template <typename T>
Var<T> total_loss(const Var<T>& l_g, const Var<T>& l_fm, const Var<T>& l_wave,
                  const Var<T>& l_mel, const LossWeights& w,
                  LossReport* report = nullptr) {
  const T g = detail::checked_scalar(l_g, "total_loss: l_g");
  const T fm = detail::checked_scalar(l_fm, "total_loss: l_fm");
  const T wv = detail::checked_scalar(l_wave, "total_loss: l_wave");
  const T ml = detail::checked_scalar(l_mel, "total_loss: l_mel");
  Var<T> total = add(
      add(add(scale(l_g, static_cast<T>(w.lambda_gen)),
              scale(l_fm, static_cast<T>(w.lambda_fm))),
          scale(l_wave, static_cast<T>(w.lambda_wave))),
      scale(l_mel, static_cast<T>(w.lambda_mel)));
  const T cs = detail::checked_scalar(total, "total_loss: l_cs");
  if (report != nullptr) {
    report->l_g = static_cast<double>(g);
    report->l_fm = static_cast<double>(fm);
    report->l_wave = static_cast<double>(wv);
    report->l_mel = static_cast<double>(ml);
    report->l_cs = static_cast<double>(cs);
  }
  return total;
}

}  // namespace conchshell
