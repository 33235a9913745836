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
#include <complex>
#include <vector>

#include "conchshell/common.hpp"

namespace conchshell {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place. inverse=true applies the
// conjugate transform and the 1/n scale.
inline void fft_inplace(std::vector<std::complex<double>>* a, bool inverse) {
  const size_t n = a->size();
  if (!is_pow2(n)) throw Error(strf("fft: length ", n, " is not a power of 2"));
  auto& v = *a;
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(v[i], v[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) *
                       (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = v[i + k];
        const std::complex<double> t = v[i + k + len / 2] * w;
        v[i + k] = u + t;
        v[i + k + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : v) x /= static_cast<double>(n);
}

// One-sided DFT of a real frame zero-padded to n_fft: bins 0..n_fft/2.
inline std::vector<std::complex<double>> rfft_onesided(
    const std::vector<double>& frame, size_t n_fft) {
  if (frame.size() > n_fft)
    throw Error(strf("rfft: frame of ", frame.size(), " exceeds n_fft ", n_fft));
  std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
  for (size_t i = 0; i < frame.size(); ++i) buf[i] = {frame[i], 0.0};
  fft_inplace(&buf, false);
  buf.resize(n_fft / 2 + 1);
  return buf;
}

}  // namespace conchshell
