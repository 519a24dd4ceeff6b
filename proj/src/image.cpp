// Copyright 2026 The ged Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ged/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace ged {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  // Unwind through libpng's longjmp buffer; the caller rethrows.
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

// Decoded PNG, normalized to 8- or 16-bit samples with `channels` per pixel.
struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<uint16_t> samples;
};

RawPng read_png(const std::filesystem::path& path, bool want_rgb) {
  FilePtr f = open_file(path, "rb");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  RawPng out;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png decode failed for " + path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_color = (color & PNG_COLOR_MASK_COLOR) || color == PNG_COLOR_TYPE_PALETTE;
  if (want_rgb && !is_color) png_set_gray_to_rgb(png);
  if (!want_rgb && is_color) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (depth == 16) png_set_swap(png);  // host order (little-endian hosts)
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const size_t n = static_cast<size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (size_t i = 0; i < n; ++i)
      out.samples[i] = static_cast<uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
  } else {
    for (size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               int bit_depth, const std::vector<uint16_t>& samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr f = open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  const size_t rowbytes = static_cast<size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_byte> buffer(rowbytes * height);
  const size_t n = static_cast<size_t>(width) * height * channels;
  if (bit_depth == 16) {
    for (size_t i = 0; i < n; ++i) {
      buffer[2 * i] = static_cast<png_byte>(samples[i] >> 8);  // PNG is big-endian
      buffer[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xff);
    }
  } else {
    for (size_t i = 0; i < n; ++i) buffer[i] = static_cast<png_byte>(samples[i]);
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * y;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed for " + path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

uint16_t to8(double v) {
  return static_cast<uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

size_t count_edges(const BinaryMap& map) {
  return static_cast<size_t>(std::count(map.px.begin(), map.px.end(), uint8_t{1}));
}

bool is_binary(const BinaryMap& map) {
  return std::all_of(map.px.begin(), map.px.end(), [](uint8_t v) { return v <= 1; });
}

RgbImage edge_to_rgb(const BinaryMap& map) {
  RgbImage img(map.height, map.width);
  for (size_t i = 0; i < map.size(); ++i)
    for (int c = 0; c < 3; ++c) img.data[3 * i + c] = map.px[i];
  return img;
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  RawPng raw = read_png(path, true);
  RgbImage img(raw.height, raw.width);
  const double scale = raw.bit_depth == 16 ? 65535.0 : 255.0;
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = raw.samples[i] / scale;
  return img;
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<uint16_t> s(image.data.size());
  std::transform(image.data.begin(), image.data.end(), s.begin(), to8);
  write_png(path, image.width, image.height, 3, 8, s);
}

GrayPng read_gray_png(const std::filesystem::path& path) {
  RawPng raw = read_png(path, false);
  GrayPng g;
  g.bit_depth = raw.bit_depth;
  g.samples = Plane<uint16_t>(raw.height, raw.width);
  g.samples.px = std::move(raw.samples);
  return g;
}

BinaryMap read_edge_png(const std::filesystem::path& path) {
  GrayPng g = read_gray_png(path);
  const uint16_t half = g.bit_depth == 16 ? 32768 : 128;
  BinaryMap m(g.samples.height, g.samples.width);
  for (size_t i = 0; i < m.size(); ++i) m.px[i] = g.samples.px[i] >= half ? 1 : 0;
  return m;
}

void write_edge_png(const std::filesystem::path& path, const BinaryMap& map) {
  require(is_binary(map), "edge map must be binary");
  std::vector<uint16_t> s(map.size());
  for (size_t i = 0; i < s.size(); ++i) s[i] = map.px[i] ? 255 : 0;
  write_png(path, map.width, map.height, 1, 8, s);
}

ProbMap read_prob_png(const std::filesystem::path& path) {
  GrayPng g = read_gray_png(path);
  const double scale = g.bit_depth == 16 ? 65535.0 : 255.0;
  ProbMap m(g.samples.height, g.samples.width);
  for (size_t i = 0; i < m.size(); ++i) m.px[i] = g.samples.px[i] / scale;
  return m;
}

void write_prob_png16(const std::filesystem::path& path, const ProbMap& map) {
  std::vector<uint16_t> s(map.size());
  for (size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<uint16_t>(std::lround(std::clamp(map.px[i], 0.0, 1.0) * 65535.0));
  write_png(path, map.width, map.height, 1, 16, s);
}

}  // namespace ged
