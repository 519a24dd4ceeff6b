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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ged/error.hpp"

namespace ged {

/// Single-channel row-major raster.
template <typename T>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> px;

  Plane() = default;
  Plane(int h, int w, T fill = T{}) : height(h), width(w), px(static_cast<size_t>(h) * w, fill) {}

  T& at(int y, int x) { return px[static_cast<size_t>(y) * width + x]; }
  const T& at(int y, int x) const { return px[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return px.size(); }
  bool same_shape(int h, int w) const { return height == h && width == w; }
  template <typename U>
  bool same_shape(const Plane<U>& o) const {
    return height == o.height && width == o.width;
  }
  bool operator==(const Plane&) const = default;
};

/// Edge map with values exactly 0 or 1.
using BinaryMap = Plane<uint8_t>;
/// Edge probability map with values in [0, 1].
using ProbMap = Plane<double>;

/// Interleaved H x W x 3 image, values in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  RgbImage() = default;
  RgbImage(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const RgbImage&) const = default;
};

size_t count_edges(const BinaryMap& map);
bool is_binary(const BinaryMap& map);

/// Replicates a 0/1 edge map into a gray RGB image.
RgbImage edge_to_rgb(const BinaryMap& map);

// PNG I/O. Images are 8-bit RGB; edge maps 8-bit gray with 0 / 255;
// probability maps are written as 16-bit gray round(p * 65535) and read back
// from either 8- or 16-bit gray.
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);
BinaryMap read_edge_png(const std::filesystem::path& path);
void write_edge_png(const std::filesystem::path& path, const BinaryMap& map);
ProbMap read_prob_png(const std::filesystem::path& path);
void write_prob_png16(const std::filesystem::path& path, const ProbMap& map);

/// Raw gray samples plus the bit depth they were stored with.
struct GrayPng {
  Plane<uint16_t> samples;
  int bit_depth = 8;
};
GrayPng read_gray_png(const std::filesystem::path& path);

}  // namespace ged
