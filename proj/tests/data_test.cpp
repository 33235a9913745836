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

#include "conchshell/data.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "conchshell/image_io.hpp"
#include "conchshell/wav.hpp"

namespace conchshell {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("conchshell_data_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

void touch(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  ASSERT_TRUE(f.good()) << p;
}

// Writes a corpus of empty image/audio pairs; the manifest builder pairs by
// filename only and never decodes.
void write_pairs(const fs::path& cat_dir, size_t n, const char* img_ext) {
  fs::create_directories(cat_dir);
  char name[32];
  for (size_t i = 0; i < n; ++i) {
    std::snprintf(name, sizeof(name), "clip%04zu", i);
    touch(cat_dir / (std::string(name) + img_ext));
    touch(cat_dir / (std::string(name) + ".wav"));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(f)),
                std::istreambuf_iterator<char>());
  return s;
}

size_t count_train(const DatasetManifest& m) {
  size_t n = 0;
  for (const auto& it : m.items) n += it.train ? 1 : 0;
  return n;
}

// Magnitude of the length-N DFT at one bin, by direct summation.
double dft_magnitude(const std::vector<double>& x, size_t bin) {
  double re = 0.0, im = 0.0;
  const double w = 2.0 * M_PI * static_cast<double>(bin) /
                   static_cast<double>(x.size());
  for (size_t n = 0; n < x.size(); ++n) {
    re += x[n] * std::cos(w * static_cast<double>(n));
    im -= x[n] * std::sin(w * static_cast<double>(n));
  }
  return std::sqrt(re * re + im * im);
}

TEST(BuildManifest, ThreeThousandItemsSplit2550To450) {
  TempDir tmp("split3000");
  write_pairs(tmp.path / "piano", 1500, ".png");
  write_pairs(tmp.path / "strings", 1500, ".jpg");
  const DatasetManifest m = build_manifest(tmp.str(), 0.85, 11);
  ASSERT_EQ(m.items.size(), 3000u);
  EXPECT_EQ(count_train(m), 2550u);
  EXPECT_EQ(m.split_indices(true).size(), 2550u);
  EXPECT_EQ(m.split_indices(false).size(), 450u);
}

TEST(BuildManifest, TwentyItemsSplit17To3AndSameSeedIsDeterministic) {
  TempDir tmp("split20");
  write_pairs(tmp.path / "a", 12, ".png");
  write_pairs(tmp.path / "b", 8, ".jpeg");
  const DatasetManifest m = build_manifest(tmp.str(), 0.85, 5);
  ASSERT_EQ(m.items.size(), 20u);
  EXPECT_EQ(count_train(m), 17u);

  const DatasetManifest again = build_manifest(tmp.str(), 0.85, 5);
  const std::string p1 = (tmp.path / "m1.txt").string();
  const std::string p2 = (tmp.path / "m2.txt").string();
  save_manifest(m, p1);
  save_manifest(again, p2);
  EXPECT_EQ(read_file(p1), read_file(p2));
}

TEST(BuildManifest, CategoriesAreSortedDirectoryNames) {
  TempDir tmp("cats");
  // Created in non-lexicographic order on purpose.
  write_pairs(tmp.path / "zither", 1, ".png");
  write_pairs(tmp.path / "accordion", 1, ".png");
  write_pairs(tmp.path / "marimba", 1, ".png");
  const DatasetManifest m = build_manifest(tmp.str(), 1.0, 0);
  ASSERT_EQ(m.categories.size(), 3u);
  EXPECT_EQ(m.categories[0], "accordion");
  EXPECT_EQ(m.categories[1], "marimba");
  EXPECT_EQ(m.categories[2], "zither");
  for (const auto& it : m.items) {
    const std::string dir =
        fs::path(it.image_path).parent_path().filename().string();
    EXPECT_EQ(dir, m.categories.at(it.category));
  }
}

TEST(BuildManifest, ImageWithoutAudioPairNamesTheFile) {
  TempDir tmp("orphan");
  write_pairs(tmp.path / "cat", 2, ".png");
  const fs::path orphan = tmp.path / "cat" / "lonely.png";
  touch(orphan);
  try {
    build_manifest(tmp.str(), 0.85, 0);
    FAIL() << "orphan image should be rejected";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(orphan.string()), std::string::npos)
        << e.what();
  }
}

TEST(BuildManifest, RejectsEmptyCorpusBadRootAndBadRatio) {
  TempDir tmp("empty");
  fs::create_directories(tmp.path / "cat_without_items");
  EXPECT_THROW(build_manifest(tmp.str(), 0.85, 0), DataError);
  EXPECT_THROW(build_manifest((tmp.path / "missing").string(), 0.85, 0),
               DataError);
  write_pairs(tmp.path / "cat_without_items", 1, ".png");
  EXPECT_THROW(build_manifest(tmp.str(), 1.5, 0), DataError);
  EXPECT_THROW(build_manifest(tmp.str(), -0.1, 0), DataError);
}

TEST(Manifest, SaveLoadRoundTripAndByteStableSave) {
  TempDir tmp("roundtrip");
  write_pairs(tmp.path / "left", 3, ".png");
  write_pairs(tmp.path / "right", 4, ".jpg");
  const DatasetManifest m = build_manifest(tmp.str(), 0.6, 3);

  const std::string p1 = (tmp.path / "m1.txt").string();
  const std::string p2 = (tmp.path / "m2.txt").string();
  save_manifest(m, p1);
  save_manifest(m, p2);
  EXPECT_EQ(read_file(p1), read_file(p2));

  const DatasetManifest r = load_manifest(p1);
  ASSERT_EQ(r.categories, m.categories);
  ASSERT_EQ(r.items.size(), m.items.size());
  for (size_t i = 0; i < m.items.size(); ++i) {
    EXPECT_EQ(r.items[i].image_path, m.items[i].image_path);
    EXPECT_EQ(r.items[i].audio_path, m.items[i].audio_path);
    EXPECT_EQ(r.items[i].category, m.items[i].category);
    EXPECT_EQ(r.items[i].train, m.items[i].train);
  }
}

TEST(Manifest, LoadRejectsMalformedFiles) {
  TempDir tmp("badload");
  auto write_text = [&](const char* name, const std::string& body) {
    const std::string p = (tmp.path / name).string();
    std::ofstream f(p, std::ios::binary);
    f << body;
    return p;
  };

  EXPECT_THROW(load_manifest(write_text("header.txt", "something else\n")),
               DataError);
  EXPECT_THROW(
      load_manifest(write_text(
          "cat.txt",
          "conchshell-manifest v1\nitem\ta.png\ta.wav\tghost\ttrain\n")),
      DataError);
  EXPECT_THROW(
      load_manifest(write_text(
          "split.txt", "conchshell-manifest v1\ncategory\tx\n"
                       "item\ta.png\ta.wav\tx\tmaybe\n")),
      DataError);
  EXPECT_THROW(
      load_manifest(write_text("fields.txt",
                               "conchshell-manifest v1\nitem\tonly\ttwo\n")),
      DataError);
  EXPECT_THROW(
      load_manifest(write_text("none.txt",
                               "conchshell-manifest v1\ncategory\tx\n")),
      DataError);
  EXPECT_THROW(load_manifest((tmp.path / "absent.txt").string()), DataError);
}

TEST(LoadAudio, NativeRateKeepsSamplesAndPadsWithZeros) {
  TempDir tmp("pad");
  // Exact multiples of 1/32768 survive the PCM16 round trip bit-for-bit.
  std::vector<double> x(1000);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<double>((static_cast<int>(i % 400) - 200)) / 32768.0;
  const std::string wav = (tmp.path / "t.wav").string();
  write_wav(wav, x, 16000);

  const std::vector<double> same = load_audio(wav, x.size(), 16000);
  ASSERT_EQ(same.size(), x.size());
  for (size_t i = 0; i < x.size(); ++i) ASSERT_EQ(same[i], x[i]) << i;

  const std::vector<double> padded = load_audio(wav, 2 * x.size(), 16000);
  ASSERT_EQ(padded.size(), 2 * x.size());
  for (size_t i = 0; i < x.size(); ++i) ASSERT_EQ(padded[i], x[i]) << i;
  for (size_t i = x.size(); i < padded.size(); ++i)
    ASSERT_EQ(padded[i], 0.0) << i;
}

TEST(LoadAudio, CropKeepsTheHeadOfTheClip) {
  TempDir tmp("crop");
  std::vector<double> x(2000);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<double>(static_cast<int>(i % 256) - 128) / 32768.0;
  const std::string wav = (tmp.path / "t.wav").string();
  write_wav(wav, x, 16000);

  const std::vector<double> head = load_audio(wav, 500, 16000);
  ASSERT_EQ(head.size(), 500u);
  for (size_t i = 0; i < head.size(); ++i) ASSERT_EQ(head[i], x[i]) << i;
}

TEST(LoadAudio, ResamplesForeignRateBeforeFitting) {
  TempDir tmp("resample");
  // 0.5 s of a 440 Hz sine at 32 kHz must land on bin 220 once brought to
  // 16 kHz and fit to 8000 samples (2 Hz bin spacing).
  const size_t n32 = 16000;
  std::vector<double> x(n32);
  for (size_t i = 0; i < n32; ++i)
    x[i] = 0.5 * std::sin(2.0 * M_PI * 440.0 * static_cast<double>(i) /
                          32000.0);
  const std::string wav = (tmp.path / "sine.wav").string();
  write_wav(wav, x, 32000);

  const std::vector<double> y = load_audio(wav, 8000, 16000);
  ASSERT_EQ(y.size(), 8000u);
  size_t best_bin = 1;
  double best_mag = -1.0;
  for (size_t b = 1; b <= 400; ++b) {
    const double mag = dft_magnitude(y, b);
    if (mag > best_mag) {
      best_mag = mag;
      best_bin = b;
    }
  }
  EXPECT_EQ(best_bin, 220u);
}

TEST(MakeFixture, WritesPairedDecodableCorpus) {
  TempDir tmp("fixture");
  const std::string root = (tmp.path / "fix").string();
  make_fixture(root, 6, 4, 1.2, 7);

  const DatasetManifest m = build_manifest(root, 0.85, 17);
  ASSERT_EQ(m.categories.size(), 6u);
  ASSERT_EQ(m.items.size(), 24u);
  EXPECT_EQ(count_train(m), 20u);

  // Every clip decodes; lengths alternate so both the crop and the pad path
  // of load_audio get exercised by the corpus.
  const WavFile even = read_wav(root + "/cat0/clip0.wav");
  const WavFile odd = read_wav(root + "/cat0/clip1.wav");
  EXPECT_EQ(even.sample_rate, 16000u);
  EXPECT_GT(even.samples.size(), odd.samples.size());

  const Tensor<double> img = load_image<double>(root + "/cat0/clip0.png", 64);
  ASSERT_EQ(img.dim(0), 3u);
  ASSERT_EQ(img.dim(1), 64u);
  ASSERT_EQ(img.dim(2), 64u);
  for (size_t i = 0; i < img.numel(); ++i) {
    ASSERT_GE(img[i], 0.0);
    ASSERT_LE(img[i], 1.0);
  }

  const std::vector<double> clip = load_audio(root + "/cat0/clip1.wav",
                                              19200, 16000);
  EXPECT_EQ(clip.size(), 19200u);

  EXPECT_THROW(make_fixture((tmp.path / "zero").string(), 0, 4), DataError);
}

}  // namespace
}  // namespace conchshell
