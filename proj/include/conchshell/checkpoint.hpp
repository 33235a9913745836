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

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conchshell/common.hpp"

namespace conchshell {

// Single-file weight container:
//   magic "CSHELL01" | u32 version | u64 meta_len | meta JSON (UTF-8)
//   | u64 payload_len | little-endian f32 payload | u32 CRC-32
// The CRC covers every byte before it, magic included. Metadata lists each
// array's name, dtype, shape and byte offset into the payload, plus the
// training step and an arbitrary config object.

struct CheckpointArray {
  std::string name;
  std::vector<size_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  uint64_t step = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<CheckpointArray> arrays;

  const CheckpointArray* find(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'H', 'E',
                                             'L', 'L', '0', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline uint32_t crc32(const unsigned char* data, size_t len,
                      uint32_t seed = 0) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

template <typename U>
void put_le(std::string* out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i)
    out->push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& buf, size_t* pos) {
  if (*pos + sizeof(U) > buf.size()) throw DataError("checkpoint truncated");
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(buf[*pos + i])) << (8 * i);
  *pos += sizeof(U);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  nlohmann::json meta;
  meta["step"] = ck.step;
  meta["config"] = ck.config;
  meta["arrays"] = nlohmann::json::array();
  std::string payload;
  for (const auto& a : ck.arrays) {
    nlohmann::json ja;
    ja["name"] = a.name;
    ja["dtype"] = "f32";
    ja["shape"] = a.shape;
    ja["offset"] = payload.size();
    meta["arrays"].push_back(ja);
    const size_t bytes = a.data.size() * sizeof(float);
    const size_t base = payload.size();
    payload.resize(base + bytes);
    for (size_t i = 0; i < a.data.size(); ++i) {
      uint32_t bits;
      std::memcpy(&bits, &a.data[i], sizeof(bits));
      for (size_t b = 0; b < 4; ++b)
        payload[base + 4 * i + b] =
            static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  const std::string meta_str = meta.dump();
  std::string buf(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::put_le<uint32_t>(&buf, detail::kCheckpointVersion);
  detail::put_le<uint64_t>(&buf, meta_str.size());
  buf += meta_str;
  detail::put_le<uint64_t>(&buf, payload.size());
  buf += payload;
  const uint32_t crc = detail::crc32(
      reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
  detail::put_le<uint32_t>(&buf, crc);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(strf("cannot write checkpoint ", path));
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw DataError(strf("short write to checkpoint ", path));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(strf("cannot open checkpoint ", path));
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(detail::kCheckpointMagic) + 4 + 8 + 8 + 4)
    throw DataError("checkpoint truncated");
  if (std::memcmp(buf.data(), detail::kCheckpointMagic,
                  sizeof(detail::kCheckpointMagic)) != 0)
    throw DataError(strf("not a checkpoint file: ", path));
  size_t pos = sizeof(detail::kCheckpointMagic);
  const uint32_t version = detail::get_le<uint32_t>(buf, &pos);
  if (version != detail::kCheckpointVersion)
    throw DataError(strf("checkpoint version mismatch: file has ", version,
                         ", reader supports ", detail::kCheckpointVersion));
  const uint64_t meta_len = detail::get_le<uint64_t>(buf, &pos);
  if (pos + meta_len > buf.size()) throw DataError("checkpoint truncated");
  const std::string meta_str = buf.substr(pos, meta_len);
  pos += meta_len;
  const uint64_t payload_len = detail::get_le<uint64_t>(buf, &pos);
  const size_t payload_pos = pos;
  if (pos + payload_len + 4 > buf.size())
    throw DataError("checkpoint truncated");
  pos += payload_len;
  const uint32_t stored_crc = detail::get_le<uint32_t>(buf, &pos);
  if (pos != buf.size()) throw DataError("checkpoint has trailing bytes");
  const uint32_t actual_crc = detail::crc32(
      reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4);
  if (stored_crc != actual_crc)
    throw DataError(strf("checkpoint checksum failure: stored ", stored_crc,
                         " computed ", actual_crc));

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const std::exception& e) {
    throw DataError(strf("checkpoint metadata unparseable: ", e.what()));
  }
  Checkpoint ck;
  ck.step = meta.value("step", uint64_t{0});
  ck.config = meta.value("config", nlohmann::json::object());
  for (const auto& ja : meta.value("arrays", nlohmann::json::array())) {
    CheckpointArray a;
    a.name = ja.at("name").get<std::string>();
    if (ja.at("dtype").get<std::string>() != "f32")
      throw DataError(strf("checkpoint array ", a.name, " has unsupported dtype"));
    a.shape = ja.at("shape").get<std::vector<size_t>>();
    size_t n = 1;
    for (size_t d : a.shape) n *= d;
    const uint64_t offset = ja.at("offset").get<uint64_t>();
    if (offset + n * sizeof(float) > payload_len)
      throw DataError("checkpoint truncated");
    a.data.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t bits = 0;
      for (size_t b = 0; b < 4; ++b)
        bits |= static_cast<uint32_t>(static_cast<unsigned char>(
                    buf[payload_pos + offset + 4 * i + b]))
                << (8 * b);
      std::memcpy(&a.data[i], &bits, sizeof(float));
    }
    ck.arrays.push_back(std::move(a));
  }
  return ck;
}

}  // namespace conchshell
