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

#include "conchshell/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "conchshell/nn.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {
namespace {

namespace fs = std::filesystem;

std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.step = 4242;
  ck.config["level"] = "deep";
  ck.config["hop"] = 8;
  Rng rng(99);
  CheckpointArray a;
  a.name = "enc.w";
  a.shape = {3, 5};
  for (int i = 0; i < 15; ++i)
    a.data.push_back(static_cast<float>(rng.uniform(-2.0, 2.0)));
  CheckpointArray b;
  b.name = "enc.b";
  b.shape = {5};
  for (int i = 0; i < 5; ++i) b.data.push_back(static_cast<float>(rng.normal()));
  ck.arrays = {a, b};
  return ck;
}

TEST(Checkpoint, RoundTripBitExact) {
  const std::string path = temp_path("cshell_ck_roundtrip.bin");
  Checkpoint ck = sample_checkpoint();
  save_checkpoint(ck, path);
  Checkpoint lk = load_checkpoint(path);
  EXPECT_EQ(lk.step, ck.step);
  EXPECT_EQ(lk.config["level"], "deep");
  ASSERT_EQ(lk.arrays.size(), ck.arrays.size());
  for (size_t i = 0; i < ck.arrays.size(); ++i) {
    EXPECT_EQ(lk.arrays[i].name, ck.arrays[i].name);
    EXPECT_EQ(lk.arrays[i].shape, ck.arrays[i].shape);
    ASSERT_EQ(lk.arrays[i].data.size(), ck.arrays[i].data.size());
    for (size_t j = 0; j < ck.arrays[i].data.size(); ++j) {
      uint32_t b0, b1;
      std::memcpy(&b0, &ck.arrays[i].data[j], 4);
      std::memcpy(&b1, &lk.arrays[i].data[j], 4);
      EXPECT_EQ(b0, b1);
    }
  }
  fs::remove(path);
}

TEST(Checkpoint, SaveIsDeterministic) {
  const std::string p1 = temp_path("cshell_ck_det1.bin");
  const std::string p2 = temp_path("cshell_ck_det2.bin");
  Checkpoint ck = sample_checkpoint();
  save_checkpoint(ck, p1);
  save_checkpoint(ck, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  EXPECT_EQ(s1, s2);
  fs::remove(p1);
  fs::remove(p2);
}

TEST(Checkpoint, TruncatedFileRejected) {
  const std::string path = temp_path("cshell_ck_trunc.bin");
  save_checkpoint(sample_checkpoint(), path);
  std::ifstream f(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  f.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  try {
    load_checkpoint(path);
    FAIL() << "expected truncation error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
  fs::remove(path);
}

TEST(Checkpoint, FutureVersionRejected) {
  const std::string path = temp_path("cshell_ck_ver.bin");
  save_checkpoint(sample_checkpoint(), path);
  std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
  f.seekp(8);  // version u32 follows the 8-byte magic
  const char v2 = 2;
  f.write(&v2, 1);
  f.close();
  try {
    load_checkpoint(path);
    FAIL() << "expected version error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version mismatch"),
              std::string::npos);
  }
  fs::remove(path);
}

TEST(Checkpoint, CorruptedPayloadRejected) {
  const std::string path = temp_path("cshell_ck_crc.bin");
  save_checkpoint(sample_checkpoint(), path);
  const auto size = fs::file_size(path);
  std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
  f.seekg(static_cast<std::streamoff>(size - 12));
  char byte;
  f.read(&byte, 1);
  byte = static_cast<char>(byte ^ 0x40);
  f.seekp(static_cast<std::streamoff>(size - 12));
  f.write(&byte, 1);
  f.close();
  try {
    load_checkpoint(path);
    FAIL() << "expected checksum error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
  fs::remove(path);
}

TEST(Checkpoint, NonCheckpointFileRejected) {
  const std::string path = temp_path("cshell_ck_garbage.bin");
  std::ofstream out(path, std::ios::binary);
  out << "definitely not a checkpoint, but long enough to pass size checks";
  out.close();
  EXPECT_THROW(load_checkpoint(path), DataError);
  fs::remove(path);
}

TEST(Checkpoint, ParamsSaveLoadThroughFile) {
  const std::string path = temp_path("cshell_ck_params.bin");
  Rng rng(123);
  Params<float> src;
  src.uniform("conv.w", {4, 2, 3}, 6, rng);
  src.zeros("conv.b", {4});
  Checkpoint ck;
  ck.step = 7;
  src.save_into(&ck, "g.");
  save_checkpoint(ck, path);

  Params<float> dst;
  Rng rng2(456);
  dst.uniform("conv.w", {4, 2, 3}, 6, rng2);
  dst.zeros("conv.b", {4});
  EXPECT_NE(dst.content_hash(), src.content_hash());
  Checkpoint lk = load_checkpoint(path);
  dst.load_from(lk, "g.");
  EXPECT_EQ(dst.content_hash(), src.content_hash());
  EXPECT_EQ(lk.step, 7u);

  Params<float> wrong;
  Rng rng3(1);
  wrong.uniform("conv.w", {4, 2, 2}, 4, rng3);
  EXPECT_THROW(wrong.load_from(lk, "g."), DataError);
  EXPECT_THROW(wrong.load_from(lk, "missing."), DataError);
  fs::remove(path);
}

}  // namespace
}  // namespace conchshell
