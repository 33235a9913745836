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

#include <cmath>
#include <cstdint>
#include <vector>

#include "conchshell/common.hpp"

namespace conchshell {

namespace detail {

// Zeroth-order modified Bessel function, power series.
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double h = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= h / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace detail

// Kaiser-windowed sinc resampler. Output length round(len * to / from).
// The kernel half-width is 32 source samples, stretched by 1/cutoff when
// decimating; weights are renormalized per output phase so a constant
// signal passes through with unit gain everywhere, boundaries included.
inline std::vector<double> resample(const std::vector<double>& x,
                                    double from_hz, double to_hz) {
  if (from_hz <= 0 || to_hz <= 0)
    throw DataError(strf("resample: rates must be positive, got ", from_hz,
                         " -> ", to_hz));
  if (from_hz == to_hz) return x;
  if (x.empty()) return {};
  const double ratio = to_hz / from_hz;
  const size_t out_len = static_cast<size_t>(
      std::llround(static_cast<double>(x.size()) * ratio));
  const double cutoff = ratio < 1.0 ? ratio : 1.0;  // of source Nyquist
  const double beta = 8.6;
  const double half_width = 32.0 / cutoff;
  const double i0_beta = detail::bessel_i0(beta);
  std::vector<double> y(out_len);
  const int64_t L = static_cast<int64_t>(x.size());
  for (size_t m = 0; m < out_len; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const int64_t n0 = static_cast<int64_t>(std::ceil(t - half_width));
    const int64_t n1 = static_cast<int64_t>(std::floor(t + half_width));
    double acc = 0.0, wsum = 0.0;
    for (int64_t n = n0 <= 0 ? 0 : n0; n <= (n1 >= L - 1 ? L - 1 : n1); ++n) {
      const double u = static_cast<double>(n) - t;
      const double frac = u / half_width;
      const double arg = 1.0 - frac * frac;
      if (arg < 0.0) continue;
      const double w = cutoff * detail::sinc(cutoff * u) *
                       detail::bessel_i0(beta * std::sqrt(arg)) / i0_beta;
      acc += w * x[static_cast<size_t>(n)];
      wsum += w;
    }
    y[m] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return y;
}

}  // namespace conchshell
