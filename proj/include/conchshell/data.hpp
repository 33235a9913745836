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

// Dataset handling. A corpus is a directory of category folders; inside each
// folder an image and its audio share a basename. The manifest fixes the
// item order, labels, and train/validation split.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "conchshell/common.hpp"
#include "conchshell/dsp/resample.hpp"
#include "conchshell/image_io.hpp"
#include "conchshell/rng.hpp"
#include "conchshell/tensor.hpp"
#include "conchshell/wav.hpp"

namespace conchshell {

struct ManifestItem {
  std::string image_path;
  std::string audio_path;
  size_t category = 0;
  bool train = true;
};

struct DatasetManifest {
  std::vector<std::string> categories;
  std::vector<ManifestItem> items;

  std::vector<size_t> split_indices(bool train) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < items.size(); ++i)
      if (items[i].train == train) out.push_back(i);
    return out;
  }
};

namespace detail {

inline bool has_extension(const std::filesystem::path& p,
                          std::initializer_list<const char*> exts) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (const char* want : exts)
    if (e == want) return true;
  return false;
}

}  // namespace detail

// Scans root_dir, pairs every image with the same-basename audio file in its
// category folder, shuffles with the seed, and splits: the first
// floor(ratio*n) items train, the rest validate. Category labels follow the
// lexicographic order of the subdirectory names.
inline DatasetManifest build_manifest(const std::string& root_dir,
                                      double split_ratio, uint64_t seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root_dir))
    throw DataError(strf("dataset root is not a directory: ", root_dir));
  if (!(split_ratio >= 0.0 && split_ratio <= 1.0))
    throw DataError("split ratio must lie in [0,1]");
  DatasetManifest m;
  std::vector<fs::path> cat_dirs;
  for (const auto& entry : fs::directory_iterator(root_dir))
    if (entry.is_directory()) cat_dirs.push_back(entry.path());
  std::sort(cat_dirs.begin(), cat_dirs.end());
  for (size_t c = 0; c < cat_dirs.size(); ++c) {
    m.categories.push_back(cat_dirs[c].filename().string());
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(cat_dirs[c]))
      if (entry.is_regular_file() &&
          detail::has_extension(entry.path(), {".png", ".jpg", ".jpeg"}))
        images.push_back(entry.path());
    std::sort(images.begin(), images.end());
    for (const auto& img : images) {
      fs::path wav = img;
      wav.replace_extension(".wav");
      if (!fs::is_regular_file(wav))
        throw DataError(strf("image without audio pair: ", img.string()));
      ManifestItem item;
      item.image_path = img.string();
      item.audio_path = wav.string();
      item.category = c;
      m.items.push_back(std::move(item));
    }
  }
  if (m.items.empty()) throw DataError("empty corpus");
  Rng rng(seed);
  rng.shuffle(m.items.begin(), m.items.end());
  const size_t n_train =
      static_cast<size_t>(std::floor(split_ratio * m.items.size() + 1e-9));
  for (size_t i = 0; i < m.items.size(); ++i)
    m.items[i].train = i < n_train;
  return m;
}

// Manifest file: one tab-separated record per line, fields in a fixed order.
inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(strf("cannot write manifest ", path));
  f << "conchshell-manifest v1\n";
  for (const auto& c : m.categories) f << "category\t" << c << "\n";
  for (const auto& it : m.items)
    f << "item\t" << it.image_path << "\t" << it.audio_path << "\t"
      << m.categories.at(it.category) << "\t" << (it.train ? "train" : "val")
      << "\n";
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(strf("cannot open manifest ", path));
  std::string line;
  if (!std::getline(f, line) || line != "conchshell-manifest v1")
    throw DataError(strf("not a manifest file: ", path));
  DatasetManifest m;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t pos = 0;
    while (true) {
      const size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos
                                            ? std::string::npos
                                            : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields[0] == "category" && fields.size() == 2) {
      m.categories.push_back(fields[1]);
    } else if (fields[0] == "item" && fields.size() == 5) {
      ManifestItem it;
      it.image_path = fields[1];
      it.audio_path = fields[2];
      const auto cat = std::find(m.categories.begin(), m.categories.end(),
                                 fields[3]);
      if (cat == m.categories.end())
        throw DataError(strf("manifest item with unknown category ",
                             fields[3]));
      it.category = static_cast<size_t>(cat - m.categories.begin());
      if (fields[4] != "train" && fields[4] != "val")
        throw DataError(strf("manifest item with unknown split ", fields[4]));
      it.train = fields[4] == "train";
      m.items.push_back(std::move(it));
    } else {
      throw DataError(strf("malformed manifest line: ", line));
    }
  }
  if (m.items.empty()) throw DataError("empty corpus");
  return m;
}

// Mono mixdown, resample to sample_rate, then head-crop or tail-zero-pad to
// exactly target_len samples.
inline std::vector<double> load_audio(const std::string& path,
                                      size_t target_len,
                                      size_t sample_rate = 16000) {
  const WavFile wav = read_wav(path);
  std::vector<double> x =
      resample(wav.samples, static_cast<double>(wav.sample_rate),
               static_cast<double>(sample_rate));
  x.resize(target_len, 0.0);
  return x;
}

// ---------------------------------------------------------------------------
// Synthetic fixture
// ---------------------------------------------------------------------------

namespace detail {

// Procedural 64x64 RGB pattern; every category has its own look and every
// item its own parameter set.
inline std::vector<unsigned char> fixture_image(size_t category, size_t item,
                                                Rng& rng) {
  const size_t S = 64;
  std::vector<unsigned char> px(S * S * 3);
  const double a = rng.uniform(0.3, 1.0), b = rng.uniform(0.3, 1.0);
  const double phase = rng.uniform(0.0, 6.28318);
  for (size_t y = 0; y < S; ++y)
    for (size_t x = 0; x < S; ++x) {
      const double u = static_cast<double>(x) / (S - 1);
      const double v = static_cast<double>(y) / (S - 1);
      double r = 0, g = 0, bl = 0;
      switch (category % 6) {
        case 0:  // horizontal gradient
          r = a * u; g = b * (1 - u); bl = 0.2;
          break;
        case 1:  // vertical stripes
          r = (std::sin(2 * 3.14159265 * (4 + double(item)) * u + phase) > 0)
                  ? a : 0.05;
          g = 0.1; bl = b * 0.5;
          break;
        case 2:  // checkerboard
          r = 0.1;
          g = (((x / 8) + (y / 8)) % 2 == 0) ? a : 0.05;
          bl = b * u;
          break;
        case 3: {  // rings
          const double d = std::hypot(u - 0.5, v - 0.5);
          r = a * (0.5 + 0.5 * std::sin(20 * d * (1 + 0.2 * double(item))));
          g = b * d; bl = 0.4;
          break;
        }
        case 4:  // diagonal ramp + noise
          r = 0.5 * (u + v) * a;
          g = rng.uniform(0.0, 0.15);
          bl = b * v;
          break;
        default:  // solid with vignette
          r = a * 0.8; g = b * 0.6;
          bl = 0.9 - 0.5 * std::hypot(u - 0.5, v - 0.5);
          break;
      }
      const size_t o = (y * S + x) * 3;
      px[o + 0] = static_cast<unsigned char>(std::lround(255 * std::min(1.0, std::max(0.0, r))));
      px[o + 1] = static_cast<unsigned char>(std::lround(255 * std::min(1.0, std::max(0.0, g))));
      px[o + 2] = static_cast<unsigned char>(std::lround(255 * std::min(1.0, std::max(0.0, bl))));
    }
  return px;
}

// Decaying sine chord; the root frequency is pinned to the category so that
// audio and label correlate.
inline std::vector<double> fixture_audio(size_t category, size_t item,
                                         size_t n_samples, Rng& rng) {
  const double root = 220.0 * std::pow(2.0, static_cast<double>(category) / 6.0);
  const double ratios[3] = {1.0, 1.25, 1.5};
  std::vector<double> x(n_samples, 0.0);
  const size_t note_len = std::max<size_t>(2000, n_samples / 8);
  size_t pos = 0;
  size_t note = item;
  while (pos < n_samples) {
    const double f = root * ratios[note % 3] * (1.0 + 0.002 * double(note % 5));
    const double amp = 0.25 + 0.1 * rng.uniform();
    const size_t len = std::min(note_len, n_samples - pos);
    for (size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / 16000.0;
      x[pos + i] += amp * std::exp(-6.0 * t) *
                    (std::sin(2 * 3.14159265358979 * f * t) +
                     0.4 * std::sin(2 * 3.14159265358979 * 2 * f * t));
    }
    pos += len;
    ++note;
  }
  for (double& v : x) v = std::max(-0.99, std::min(0.99, v));
  return x;
}

}  // namespace detail

// Writes a small synthetic corpus: `n_categories` folders, `pairs_per_cat`
// image/audio pairs each. Audio lengths alternate around `seconds` so both
// the crop and the pad path of load_audio get exercised.
inline void make_fixture(const std::string& dir, size_t n_categories = 6,
                         size_t pairs_per_cat = 4, double seconds = 1.2,
                         uint64_t seed = 7) {
  namespace fs = std::filesystem;
  if (n_categories == 0 || pairs_per_cat == 0)
    throw DataError("make_fixture: empty fixture requested");
  fs::create_directories(dir);
  Rng rng(seed);
  for (size_t c = 0; c < n_categories; ++c) {
    const std::string cat_dir = strf(dir, "/cat", c);
    fs::create_directories(cat_dir);
    for (size_t i = 0; i < pairs_per_cat; ++i) {
      Rng item_rng = rng.fork(strf("item", c, "_", i));
      const std::string base = strf(cat_dir, "/clip", i);
      write_png_rgb(base + ".png", 64, 64,
                    detail::fixture_image(c, i, item_rng));
      const double scale = (i % 2 == 0) ? 1.0 : 0.75;
      const size_t n =
          static_cast<size_t>(std::lround(seconds * scale * 16000.0));
      write_wav(base + ".wav", detail::fixture_audio(c, i, n, item_rng));
    }
  }
}

}  // namespace conchshell
