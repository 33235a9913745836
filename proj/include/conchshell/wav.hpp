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
#include <fstream>
#include <string>
#include <vector>

#include "conchshell/common.hpp"

namespace conchshell {

struct WavFile {
  uint32_t sample_rate = 0;
  uint16_t source_channels = 0;
  std::vector<double> samples;  // mono mixdown (channel mean), 1/32768 scale
};

namespace detail {

inline uint32_t rd_u32(const std::string& b, size_t p) {
  return static_cast<uint32_t>(static_cast<unsigned char>(b[p])) |
         static_cast<uint32_t>(static_cast<unsigned char>(b[p + 1])) << 8 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[p + 2])) << 16 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[p + 3])) << 24;
}

inline uint16_t rd_u16(const std::string& b, size_t p) {
  return static_cast<uint16_t>(static_cast<unsigned char>(b[p]) |
                               static_cast<unsigned char>(b[p + 1]) << 8);
}

}  // namespace detail

// Reads a RIFF/WAVE file holding signed 16-bit little-endian PCM. Multi
// channel audio is mixed down by channel mean. Sample values map to
// s / 32768 so that a full write/read cycle is the identity on PCM words.
inline WavFile read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(strf("cannot open WAV ", path));
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 12 || buf.compare(0, 4, "RIFF") != 0 ||
      buf.compare(8, 4, "WAVE") != 0)
    throw DataError(strf("not a RIFF/WAVE file: ", path));
  size_t pos = 12;
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_pos = 0, data_len = 0;
  while (pos + 8 <= buf.size()) {
    const std::string id = buf.substr(pos, 4);
    const uint32_t len = detail::rd_u32(buf, pos + 4);
    pos += 8;
    if (pos + len > buf.size())
      throw DataError(strf("corrupt RIFF chunk in ", path));
    if (id == "fmt ") {
      if (len < 16) throw DataError(strf("corrupt fmt chunk in ", path));
      format = detail::rd_u16(buf, pos);
      channels = detail::rd_u16(buf, pos + 2);
      rate = detail::rd_u32(buf, pos + 4);
      bits = detail::rd_u16(buf, pos + 14);
      have_fmt = true;
    } else if (id == "data") {
      data_pos = pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_pos == 0)
    throw DataError(strf("WAV missing fmt/data chunk: ", path));
  if (format != 1 || bits != 16)
    throw DataError(strf("unsupported WAV encoding in ", path,
                         " (want PCM 16-bit, got format ", format, " bits ",
                         bits, ")"));
  if (channels == 0) throw DataError(strf("WAV has zero channels: ", path));
  const size_t frames = data_len / (2 * channels);
  WavFile out;
  out.sample_rate = rate;
  out.source_channels = channels;
  out.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0;
    for (size_t c = 0; c < channels; ++c) {
      const size_t p = data_pos + 2 * (i * channels + c);
      const int16_t s = static_cast<int16_t>(
          static_cast<uint16_t>(static_cast<unsigned char>(buf[p])) |
          static_cast<uint16_t>(static_cast<unsigned char>(buf[p + 1])) << 8);
      acc += static_cast<double>(s);
    }
    out.samples[i] = acc / (32768.0 * channels);
  }
  return out;
}

// Writes mono PCM16. Values quantize as round(y * 32768) clamped to the
// int16 range, the inverse of the read scaling.
inline void write_wav(const std::string& path,
                      const std::vector<double>& samples,
                      uint32_t sample_rate = 16000) {
  const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  std::string buf;
  buf.reserve(44 + data_len);
  auto u32 = [&buf](uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto u16 = [&buf](uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  };
  buf += "RIFF";
  u32(36 + data_len);
  buf += "WAVEfmt ";
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(sample_rate);
  u32(sample_rate * 2);
  u16(2);
  u16(16);
  buf += "data";
  u32(data_len);
  for (double y : samples) {
    double q = std::round(y * 32768.0);
    if (q > 32767.0) q = 32767.0;
    if (q < -32768.0) q = -32768.0;
    const int16_t s = static_cast<int16_t>(q);
    buf.push_back(static_cast<char>(s & 0xFF));
    buf.push_back(static_cast<char>((s >> 8) & 0xFF));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(strf("cannot write WAV ", path));
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw DataError(strf("short write to WAV ", path));
}

}  // namespace conchshell
