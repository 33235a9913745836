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

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "conchshell/dsp/fft.hpp"
#include "conchshell/dsp/resample.hpp"
#include "conchshell/dsp/stft.hpp"

namespace conchshell {

namespace detail {

struct StoiParams {
  static constexpr double kFs = 10000.0;   // analysis rate
  static constexpr size_t kFrame = 256;    // 25.6 ms
  static constexpr size_t kHop = 128;
  static constexpr size_t kNfft = 512;
  static constexpr size_t kBands = 15;     // third octaves from 150 Hz
  static constexpr double kBandStart = 150.0;
  static constexpr size_t kSegment = 30;   // frames per 384 ms segment
  static constexpr double kSilenceDb = 40.0;
  static constexpr double kBeta = -15.0;   // clipping SDR bound, dB
};

// Third-octave band matrix over the one-sided 512-point grid, edges snapped
// to the nearest FFT bin, [low, high) inclusive-exclusive.
inline std::vector<std::pair<size_t, size_t>> stoi_bands() {
  const size_t bins = StoiParams::kNfft / 2 + 1;
  std::vector<std::pair<size_t, size_t>> bands;
  for (size_t j = 0; j < StoiParams::kBands; ++j) {
    const double cf =
        StoiParams::kBandStart * std::pow(2.0, static_cast<double>(j) / 3.0);
    const double fl = cf / std::pow(2.0, 1.0 / 6.0);
    const double fh = cf * std::pow(2.0, 1.0 / 6.0);
    auto nearest = [bins](double f) {
      size_t best = 0;
      double bestd = 1e300;
      for (size_t k = 0; k < bins; ++k) {
        const double fk = static_cast<double>(k) * StoiParams::kFs /
                          static_cast<double>(StoiParams::kNfft);
        const double d = std::abs(fk - f);
        if (d < bestd) {
          bestd = d;
          best = k;
        }
      }
      return best;
    };
    bands.emplace_back(nearest(fl), nearest(fh));
  }
  return bands;
}

// Drops frames whose windowed clean-signal energy sits more than 40 dB
// below the loudest frame, then overlap-adds the kept frames of both
// signals back into time series.
inline void stoi_remove_silent(const std::vector<double>& x,
                               const std::vector<double>& y,
                               std::vector<double>* xs,
                               std::vector<double>* ys) {
  const size_t F = StoiParams::kFrame, H = StoiParams::kHop;
  if (x.size() < F) throw DataError("stoi: no active frames");
  const std::vector<double> w = hann_periodic(F);
  const size_t frames = 1 + (x.size() - F) / H;
  std::vector<double> energy_db(frames);
  double max_db = -1e300;
  for (size_t m = 0; m < frames; ++m) {
    double e = 0.0;
    for (size_t i = 0; i < F; ++i) {
      const double v = x[m * H + i] * w[i];
      e += v * v;
    }
    energy_db[m] = e > 0.0 ? 10.0 * std::log10(e) : -1e300;
    max_db = std::max(max_db, energy_db[m]);
  }
  std::vector<size_t> keep;
  for (size_t m = 0; m < frames; ++m)
    if (energy_db[m] > max_db - StoiParams::kSilenceDb && energy_db[m] > -1e299)
      keep.push_back(m);
  if (keep.empty()) throw DataError("stoi: no active frames");
  const size_t out_len = (keep.size() - 1) * H + F;
  xs->assign(out_len, 0.0);
  ys->assign(out_len, 0.0);
  for (size_t i = 0; i < keep.size(); ++i)
    for (size_t j = 0; j < F; ++j) {
      (*xs)[i * H + j] += x[keep[i] * H + j] * w[j];
      (*ys)[i * H + j] += y[keep[i] * H + j] * w[j];
    }
}

// Third-octave band envelope, bands x frames.
inline Tensor<double> stoi_band_envelope(const std::vector<double>& x) {
  const size_t F = StoiParams::kFrame, H = StoiParams::kHop;
  if (x.size() < F) throw DataError("stoi: no active frames");
  const std::vector<double> w = hann_periodic(F);
  const size_t frames = 1 + (x.size() - F) / H;
  const auto bands = stoi_bands();
  Tensor<double> env({StoiParams::kBands, frames});
  std::vector<double> frame(F);
  for (size_t m = 0; m < frames; ++m) {
    for (size_t i = 0; i < F; ++i) frame[i] = x[m * H + i] * w[i];
    const auto spec = rfft_onesided(frame, StoiParams::kNfft);
    for (size_t j = 0; j < bands.size(); ++j) {
      double e = 0.0;
      for (size_t k = bands[j].first; k < bands[j].second; ++k)
        e += std::norm(spec[k]);
      env.at(j, m) = std::sqrt(e);
    }
  }
  return env;
}

inline double stoi_correlation(const double* x, const double* y, size_t n) {
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  bool identical = true;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
    if (x[i] != y[i]) identical = false;
  }
  const double denom = std::sqrt(sxx) * std::sqrt(syy);
  if (denom == 0.0) return identical ? 1.0 : 0.0;
  return sxy / denom;
}

}  // namespace detail

// Short-time objective intelligibility of `degraded` against `clean`.
// Both at sample_rate (resampled internally to 10 kHz). Follows the
// published definition: 15 third-octave bands, 30-frame (384 ms) segments,
// silent-frame removal keyed on the clean signal, normalized and clipped
// band envelopes, averaged correlation.
inline double stoi(const std::vector<double>& clean,
                   const std::vector<double>& degraded,
                   double sample_rate = 16000.0) {
  if (clean.size() != degraded.size())
    throw DataError(strf("stoi: length mismatch ", clean.size(), " vs ",
                         degraded.size()));
  using P = detail::StoiParams;
  const std::vector<double> x10 = resample(clean, sample_rate, P::kFs);
  const std::vector<double> y10 = resample(degraded, sample_rate, P::kFs);
  std::vector<double> xs, ys;
  detail::stoi_remove_silent(x10, y10, &xs, &ys);
  const Tensor<double> ex = detail::stoi_band_envelope(xs);
  const Tensor<double> ey = detail::stoi_band_envelope(ys);
  const size_t frames = ex.dim(1);
  if (frames < P::kSegment) throw DataError("stoi: no active frames");
  const double clip = std::pow(10.0, -P::kBeta / 20.0);
  double acc = 0.0;
  size_t count = 0;
  std::vector<double> xseg(P::kSegment), yseg(P::kSegment);
  for (size_t m = P::kSegment; m <= frames; ++m) {
    for (size_t j = 0; j < P::kBands; ++j) {
      double nx = 0, ny = 0;
      for (size_t i = 0; i < P::kSegment; ++i) {
        xseg[i] = ex.at(j, m - P::kSegment + i);
        yseg[i] = ey.at(j, m - P::kSegment + i);
        nx += xseg[i] * xseg[i];
        ny += yseg[i] * yseg[i];
      }
      const double scale = ny > 0.0 ? std::sqrt(nx / ny) : 1.0;
      for (size_t i = 0; i < P::kSegment; ++i) {
        const double scaled = yseg[i] * scale;
        const double bound = xseg[i] * (1.0 + clip);
        yseg[i] = scaled < bound ? scaled : bound;
      }
      acc += detail::stoi_correlation(xseg.data(), yseg.data(), P::kSegment);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace conchshell
