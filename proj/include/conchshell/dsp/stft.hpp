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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/dsp/fft.hpp"
#include "conchshell/tensor.hpp"

namespace conchshell {

struct MelConfig {
  size_t n_fft = 1024;
  size_t hop = 256;
  size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double sample_rate = 16000.0;
  double log_floor = 1e-5;
};

// Complex one-sided spectrogram, (n_fft/2+1) x frames.
struct Spectrogram {
  size_t bins = 0, frames = 0;
  std::vector<std::complex<double>> v;  // bin-major: v[k*frames + t]
  std::complex<double>& at(size_t k, size_t t) { return v[k * frames + t]; }
  const std::complex<double>& at(size_t k, size_t t) const {
    return v[k * frames + t];
  }
};

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

inline std::vector<double> hann_periodic(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                 static_cast<double>(n)));
  return w;
}

inline size_t stft_frame_count(size_t len, size_t n_fft, size_t hop) {
  if (len < n_fft)
    throw DataError(strf("stft: input of ", len,
                         " samples shorter than the ", n_fft, " frame"));
  return 1 + (len - n_fft) / hop;
}

// Hann-windowed one-sided STFT; no padding, frames start at t*hop.
inline Spectrogram stft(const std::vector<double>& x, size_t n_fft = 1024,
                        size_t hop = 256) {
  const size_t frames = stft_frame_count(x.size(), n_fft, hop);
  const std::vector<double> win = hann_periodic(n_fft);
  Spectrogram s;
  s.bins = n_fft / 2 + 1;
  s.frames = frames;
  s.v.resize(s.bins * frames);
  std::vector<double> frame(n_fft);
  for (size_t t = 0; t < frames; ++t) {
    for (size_t i = 0; i < n_fft; ++i) frame[i] = x[t * hop + i] * win[i];
    const auto spec = rfft_onesided(frame, n_fft);
    for (size_t k = 0; k < s.bins; ++k) s.at(k, t) = spec[k];
  }
  return s;
}

// Triangular mel filterbank, n_mels x (n_fft/2+1). Peaks at 1; band i spans
// (center[i-1], center[i+1]) so only adjacent filters overlap.
inline Tensor<double> mel_filterbank(const MelConfig& cfg) {
  const size_t bins = cfg.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min), mel_hi = hz_to_mel(cfg.f_max);
  std::vector<double> centers(cfg.n_mels + 2);
  for (size_t i = 0; i < centers.size(); ++i)
    centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                           static_cast<double>(cfg.n_mels + 1));
  Tensor<double> fb({cfg.n_mels, bins});
  for (size_t i = 0; i < cfg.n_mels; ++i) {
    const double fl = centers[i], fc = centers[i + 1], fr = centers[i + 2];
    for (size_t k = 0; k < bins; ++k) {
      const double f =
          static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
      double w = 0.0;
      if (f > fl && f < fr)
        w = f <= fc ? (f - fl) / (fc - fl) : (fr - f) / (fr - fc);
      fb.at(i, k) = w;
    }
  }
  return fb;
}

// Log-mel spectrogram with numerics pinned for the training losses.
class MelComputer {
 public:
  explicit MelComputer(MelConfig cfg = {})
      : cfg_(cfg),
        fb_(std::make_shared<const Tensor<double>>(mel_filterbank(cfg))) {}

  const MelConfig& config() const { return cfg_; }
  const Tensor<double>& filterbank() const { return *fb_; }
  std::shared_ptr<const Tensor<double>> filterbank_ptr() const { return fb_; }

  size_t frames_for(size_t len) const {
    return stft_frame_count(len, cfg_.n_fft, cfg_.hop);
  }

  // log(max(fb . |STFT|, floor)), shape (n_mels, frames).
  Tensor<double> compute(const std::vector<double>& x) const {
    const Spectrogram s = stft(x, cfg_.n_fft, cfg_.hop);
    return from_spectrogram(s);
  }

  Tensor<double> from_spectrogram(const Spectrogram& s) const {
    const size_t bins = s.bins, frames = s.frames;
    Tensor<double> mag({bins, frames});
    for (size_t i = 0; i < s.v.size(); ++i) mag[i] = std::abs(s.v[i]);
    Tensor<double> out({cfg_.n_mels, frames});
    for (size_t i = 0; i < cfg_.n_mels; ++i)
      for (size_t t = 0; t < frames; ++t) {
        double acc = 0.0;
        for (size_t k = 0; k < bins; ++k) acc += fb_->at(i, k) * mag.at(k, t);
        out.at(i, t) = std::log(acc > cfg_.log_floor ? acc : cfg_.log_floor);
      }
    return out;
  }

 private:
  MelConfig cfg_;
  std::shared_ptr<const Tensor<double>> fb_;
};

// Autograd mel op over a 1-D waveform. Forward runs in double regardless of
// T; the backward pass applies the DFT adjoint per frame via the inverse FFT
// and accumulates overlapping frame gradients into the waveform.
template <typename T>
Var<T> mel_spectrogram(const Var<T>& x, const MelComputer& mel) {
  if (x.shape().size() != 1)
    throw DataError("mel_spectrogram: want a 1-D waveform");
  const MelConfig& cfg = mel.config();
  const size_t len = x.numel();
  const size_t frames = mel.frames_for(len);
  const size_t bins = cfg.n_fft / 2 + 1;

  std::vector<double> xd(len);
  for (size_t i = 0; i < len; ++i) xd[i] = static_cast<double>(x.value()[i]);
  auto spec = std::make_shared<Spectrogram>(stft(xd, cfg.n_fft, cfg.hop));
  // mel_power[i,t] before the log, needed for the log/clamp adjoint
  auto power = std::make_shared<Tensor<double>>(
      Tensor<double>({cfg.n_mels, frames}));
  Tensor<T> out({cfg.n_mels, frames});
  for (size_t i = 0; i < cfg.n_mels; ++i)
    for (size_t t = 0; t < frames; ++t) {
      double acc = 0.0;
      for (size_t k = 0; k < bins; ++k)
        acc += mel.filterbank().at(i, k) * std::abs(spec->at(k, t));
      power->at(i, t) = acc;
      out.at(i, t) = static_cast<T>(
          std::log(acc > cfg.log_floor ? acc : cfg.log_floor));
    }

  std::shared_ptr<const Tensor<double>> fb = mel.filterbank_ptr();
  return detail::make_op<T>(
      std::move(out), {x},
      [spec, power, fb, cfg, frames, bins](AgNode<T>& self) {
        auto& px = *self.parents[0];
        px.ensure_grad();
        const std::vector<double> win = hann_periodic(cfg.n_fft);
        // dL/d|S(k,t)| = sum_i fb[i,k] * g[i,t] / power[i,t] (active rows)
        Tensor<double> gmag({bins, frames});
        for (size_t i = 0; i < cfg.n_mels; ++i)
          for (size_t t = 0; t < frames; ++t) {
            const double p = power->at(i, t);
            if (p <= cfg.log_floor) continue;  // clamped: zero gradient
            const double gi = static_cast<double>(self.grad.at(i, t)) / p;
            for (size_t k = 0; k < bins; ++k)
              gmag.at(k, t) += fb->at(i, k) * gi;
          }
        std::vector<std::complex<double>> c(cfg.n_fft);
        for (size_t t = 0; t < frames; ++t) {
          std::fill(c.begin(), c.end(), std::complex<double>(0.0, 0.0));
          for (size_t k = 0; k < bins; ++k) {
            const std::complex<double> s = spec->at(k, t);
            const double m = std::abs(s);
            if (m == 0.0) continue;
            c[k] = gmag.at(k, t) / m * s;
          }
          // dL/dy_n = Re(sum_k c_k e^{+i 2 pi k n / N}) = N * Re(IFFT(c)_n)
          fft_inplace(&c, true);
          for (size_t n = 0; n < cfg.n_fft; ++n) {
            const double gy =
                static_cast<double>(cfg.n_fft) * c[n].real() * win[n];
            px.grad[t * cfg.hop + n] += static_cast<T>(gy);
          }
        }
      });
}

// Debug dump: "CSPC" + u8 dtype(1=f64) + u32 rows + u32 cols + LE payload.
inline void dump_spectrogram(const Tensor<double>& m, const std::string& path) {
  if (m.rank() != 2) throw DataError("dump_spectrogram: want a matrix");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(strf("cannot write ", path));
  f.write("CSPC", 4);
  const unsigned char dtype = 1;
  f.write(reinterpret_cast<const char*>(&dtype), 1);
  auto put_u32 = [&f](uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      const char b = static_cast<char>((v >> (8 * i)) & 0xFF);
      f.write(&b, 1);
    }
  };
  put_u32(static_cast<uint32_t>(m.dim(0)));
  put_u32(static_cast<uint32_t>(m.dim(1)));
  for (size_t i = 0; i < m.numel(); ++i) {
    uint64_t bits;
    std::memcpy(&bits, &m[i], 8);
    for (int b = 0; b < 8; ++b) {
      const char byte = static_cast<char>((bits >> (8 * b)) & 0xFF);
      f.write(&byte, 1);
    }
  }
}

inline Tensor<double> load_spectrogram(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(strf("cannot open ", path));
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 13 || buf.compare(0, 4, "CSPC") != 0 || buf[4] != 1)
    throw DataError(strf("not a spectrogram dump: ", path));
  auto u32 = [&buf](size_t p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[p + i]))
           << (8 * i);
    return v;
  };
  const size_t rows = u32(5), cols = u32(9);
  if (buf.size() != 13 + rows * cols * 8)
    throw DataError(strf("truncated spectrogram dump: ", path));
  Tensor<double> m({rows, cols});
  for (size_t i = 0; i < rows * cols; ++i) {
    uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<uint64_t>(
                  static_cast<unsigned char>(buf[13 + 8 * i + b]))
              << (8 * b);
    std::memcpy(&m[i], &bits, 8);
  }
  return m;
}

}  // namespace conchshell
