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
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "conchshell/common.hpp"
#include "conchshell/tensor.hpp"

namespace conchshell {

struct RawImage {
  size_t width = 0, height = 0;
  std::vector<unsigned char> rgb;  // height*width*3, row-major
};

namespace detail {

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* f = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (f) std::fclose(f);
  }
};

inline RawImage read_png(const std::string& path) {
  PngReadCloser s;
  s.f = std::fopen(path.c_str(), "rb");
  if (!s.f) throw DataError(strf("cannot open image ", path));
  s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  if (!s.png) throw Error("png_create_read_struct failed");
  s.info = png_create_info_struct(s.png);
  if (!s.info) throw Error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(s.png)))
    throw DataError(strf("undecodable PNG: ", path));
  png_init_io(s.png, s.f);
  png_read_info(s.png, s.info);
  png_set_strip_16(s.png);
  png_set_packing(s.png);
  png_set_expand(s.png);          // palette/low-depth/tRNS to full pixels
  png_set_strip_alpha(s.png);
  png_set_gray_to_rgb(s.png);
  png_read_update_info(s.png, s.info);
  const size_t w = png_get_image_width(s.png, s.info);
  const size_t h = png_get_image_height(s.png, s.info);
  if (png_get_channels(s.png, s.info) != 3)
    throw DataError(strf("unexpected PNG channel layout: ", path));
  RawImage img;
  img.width = w;
  img.height = h;
  img.rgb.resize(h * w * 3);
  std::vector<png_bytep> rows(h);
  for (size_t y = 0; y < h; ++y) rows[y] = img.rgb.data() + y * w * 3;
  png_read_image(s.png, rows.data());
  png_read_end(s.png, nullptr);
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

inline void jpeg_error_throw(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

struct JpegReadCloser {
  jpeg_decompress_struct* cinfo;
  std::FILE* f;
  ~JpegReadCloser() {
    jpeg_destroy_decompress(cinfo);
    if (f) std::fclose(f);
  }
};

inline RawImage read_jpeg(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError(strf("cannot open image ", path));
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_throw;
  jpeg_create_decompress(&cinfo);
  JpegReadCloser closer{&cinfo, f};
  if (setjmp(err.jump)) throw DataError(strf("undecodable JPEG: ", path));
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  RawImage img;
  img.width = cinfo.output_width;
  img.height = cinfo.output_height;
  img.rgb.resize(img.height * img.width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + cinfo.output_scanline * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  return img;
}

}  // namespace detail

// Decodes PNG or JPEG (sniffed by magic bytes) into 8-bit RGB.
inline RawImage read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError(strf("cannot open image ", path));
  unsigned char magic[8] = {0};
  probe.read(reinterpret_cast<char*>(magic), 8);
  probe.close();
  if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G')
    return detail::read_png(path);
  if (magic[0] == 0xFF && magic[1] == 0xD8) return detail::read_jpeg(path);
  throw DataError(strf("undecodable image (not PNG or JPEG): ", path));
}

// Bilinear resize of a (C,H,W) tensor with the half-pixel convention:
// source position of output (i,j) is ((i+0.5)*H/OH - 0.5, (j+0.5)*W/OW - 0.5)
// clamped to the valid grid. Accumulation in double.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& chw, size_t oh, size_t ow) {
  if (chw.rank() != 3) throw DataError("resize_bilinear: want (C,H,W)");
  const size_t C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
  if (oh < 1 || ow < 1) throw DataError("resize_bilinear: empty output");
  std::vector<size_t> y0(oh), y1(oh), x0(ow), x1(ow);
  std::vector<double> fy(oh), fx(ow);
  for (size_t i = 0; i < oh; ++i) {
    double t = (static_cast<double>(i) + 0.5) * static_cast<double>(H) /
                   static_cast<double>(oh) -
               0.5;
    t = std::clamp(t, 0.0, static_cast<double>(H - 1));
    y0[i] = static_cast<size_t>(t);
    y1[i] = std::min(y0[i] + 1, H - 1);
    fy[i] = t - static_cast<double>(y0[i]);
  }
  for (size_t j = 0; j < ow; ++j) {
    double t = (static_cast<double>(j) + 0.5) * static_cast<double>(W) /
                   static_cast<double>(ow) -
               0.5;
    t = std::clamp(t, 0.0, static_cast<double>(W - 1));
    x0[j] = static_cast<size_t>(t);
    x1[j] = std::min(x0[j] + 1, W - 1);
    fx[j] = t - static_cast<double>(x0[j]);
  }
  Tensor<T> out({C, oh, ow});
  for (size_t c = 0; c < C; ++c) {
    const T* src = chw.data() + c * H * W;
    T* dst = out.data() + c * oh * ow;
    for (size_t i = 0; i < oh; ++i)
      for (size_t j = 0; j < ow; ++j) {
        const double a = static_cast<double>(src[y0[i] * W + x0[j]]);
        const double b = static_cast<double>(src[y0[i] * W + x1[j]]);
        const double c2 = static_cast<double>(src[y1[i] * W + x0[j]]);
        const double d = static_cast<double>(src[y1[i] * W + x1[j]]);
        const double top = a + (b - a) * fx[j];
        const double bot = c2 + (d - c2) * fx[j];
        dst[i * ow + j] = static_cast<T>(top + (bot - top) * fy[i]);
      }
  }
  return out;
}

// Full image ingestion: decode, scale to [0,1], resize to 224x224 CHW.
template <typename T>
Tensor<T> load_image(const std::string& path, size_t side = 224) {
  const RawImage raw = read_image(path);
  if (raw.width == 0 || raw.height == 0)
    throw DataError(strf("empty image: ", path));
  Tensor<T> chw({3, raw.height, raw.width});
  for (size_t c = 0; c < 3; ++c)
    for (size_t y = 0; y < raw.height; ++y)
      for (size_t x = 0; x < raw.width; ++x)
        chw.at(c, y, x) = static_cast<T>(
            raw.rgb[(y * raw.width + x) * 3 + c] / 255.0);
  if (raw.height == side && raw.width == side) return chw;
  return resize_bilinear(chw, side, side);
}

// 8-bit RGB PNG writer. pixels: height*width*3 row-major bytes.
inline void write_png_rgb(const std::string& path, size_t width, size_t height,
                          const std::vector<unsigned char>& pixels) {
  if (pixels.size() != width * height * 3)
    throw DataError("write_png_rgb: pixel buffer size mismatch");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError(strf("cannot write image ", path));
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(f);
    throw Error("libpng writer init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw DataError(strf("PNG write failed: ", path));
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

// 8-bit grayscale PNG writer for report images; values clamped to [0,1].
inline void write_png_gray(const std::string& path, const Tensor<double>& hw) {
  if (hw.rank() != 2) throw DataError("write_png_gray: want (H,W)");
  const size_t H = hw.dim(0), W = hw.dim(1);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError(strf("cannot write image ", path));
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(f);
    throw Error("libpng writer init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw DataError(strf("PNG write failed: ", path));
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, W, H, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(W);
  for (size_t y = 0; y < H; ++y) {
    for (size_t x = 0; x < W; ++x) {
      const double v = std::clamp(hw.at(y, x), 0.0, 1.0);
      row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace conchshell
