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

#include "ged/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

namespace ged {

namespace fs = std::filesystem;
using nlohmann::json;

void AnnotatedImage::validate() const {
  require(!annotations.empty(), "image '" + id + "' has no annotations");
  require(image.height > 0 && image.width > 0, "image '" + id + "' is empty");
  for (const auto& a : annotations) {
    require(a.same_shape(image.height, image.width),
            "annotation shape differs from image '" + id + "'");
    require(is_binary(a), "annotation of '" + id + "' is not binary");
  }
}

std::vector<AnnotatorSubset> enumerate_label_subsets(int k) {
  require(k >= 2, "label combination needs at least two annotators (single-label mode otherwise)");
  require(k <= 20, "too many annotators to enumerate");
  std::vector<AnnotatorSubset> out;
  out.reserve((size_t{1} << k) - k - 1);
  for (uint32_t mask = 0; mask < (1u << k); ++mask) {
    if (std::popcount(mask) < 2) continue;
    AnnotatorSubset s;
    for (int i = 0; i < k; ++i)
      if (mask & (1u << i)) s.push_back(i);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end());
  return out;
}

BinaryMap combine_labels(std::span<const BinaryMap> annotations, const AnnotatorSubset& subset) {
  require(!subset.empty(), "combine_labels: empty subset");
  for (int i : subset)
    require(i >= 0 && static_cast<size_t>(i) < annotations.size(),
            "combine_labels: annotator index out of range");
  const BinaryMap& first = annotations[static_cast<size_t>(subset.front())];
  BinaryMap out(first.height, first.width, 0);
  for (int i : subset) {
    const BinaryMap& a = annotations[static_cast<size_t>(i)];
    require(a.same_shape(first), "combine_labels: shape mismatch");
    for (size_t p = 0; p < out.size(); ++p) out.px[p] |= a.px[p];
  }
  return out;
}

std::optional<std::vector<double>> normalize_counts(std::span<const size_t> counts) {
  require(!counts.empty(), "normalize_counts: empty list");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == *hi) return std::nullopt;
  const double span = static_cast<double>(*hi - *lo);
  std::vector<double> g(counts.size());
  for (size_t i = 0; i < counts.size(); ++i)
    g[i] = static_cast<double>(counts[i] - *lo) / span;
  return g;
}

std::optional<std::vector<double>> compute_granularities(std::span<const BinaryMap> maps,
                                                         bool single_label_mode) {
  if (single_label_mode) return std::nullopt;
  require(maps.size() >= 2, "compute_granularities needs >= 2 maps outside single-label mode");
  std::vector<size_t> counts;
  counts.reserve(maps.size());
  for (const auto& m : maps) counts.push_back(count_edges(m));
  return normalize_counts(counts);
}

LabelPool build_label_pool(const AnnotatedImage& sample) {
  sample.validate();
  LabelPool pool;
  const int k = static_cast<int>(sample.annotations.size());
  if (k == 1) {
    pool.samples.push_back({sample.annotations.front(), std::nullopt, {0}});
    return pool;
  }
  std::vector<BinaryMap> combined;
  auto subsets = enumerate_label_subsets(k);
  combined.reserve(subsets.size());
  for (const auto& s : subsets) combined.push_back(combine_labels(sample.annotations, s));
  // K == 2 leaves a single combined map, which carries no granularity.
  auto g = compute_granularities(combined, combined.size() == 1);
  pool.conditioning_enabled = g.has_value();
  for (size_t i = 0; i < subsets.size(); ++i) {
    Granularity gi = g ? Granularity((*g)[i]) : std::nullopt;
    pool.samples.push_back({std::move(combined[i]), gi, std::move(subsets[i])});
  }
  return pool;
}

namespace {

RgbImage resize_bilinear(const RgbImage& src, int h, int w) {
  RgbImage out(h, w);
  const double sy = static_cast<double>(src.height) / h;
  const double sx = static_cast<double>(src.width) / w;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0, c) * (1 - wx) + src.at(y0, x1, c) * wx;
        const double bot = src.at(y1, x0, c) * (1 - wx) + src.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

BinaryMap resize_nearest(const BinaryMap& src, int h, int w) {
  BinaryMap out(h, w);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * src.height / h), src.height - 1);
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * src.width / w), src.width - 1);
      out.at(y, x) = src.at(sy, sx);
    }
  }
  return out;
}

RgbImage crop_flip(const RgbImage& src, int top, int left, int h, int w, bool flip) {
  RgbImage out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sx = flip ? left + (w - 1 - x) : left + x;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(top + y, sx, c);
    }
  return out;
}

BinaryMap crop_flip(const BinaryMap& src, int top, int left, int h, int w, bool flip) {
  BinaryMap out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = src.at(top + y, flip ? left + (w - 1 - x) : left + x);
  return out;
}

}  // namespace

TrainBatch train_batch(const AnnotatedImage& sample, const LabelPool& pool, Rng& rng,
                       const AugmentConfig& config) {
  require(!pool.samples.empty(), "train_batch: empty label pool");
  const int h0 = sample.image.height, w0 = sample.image.width;

  std::vector<size_t> picks;
  if (pool.samples.size() >= static_cast<size_t>(kMapsPerStep)) {
    std::vector<size_t> idx(pool.samples.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (int i = 0; i < kMapsPerStep; ++i) {
      const size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
      picks.push_back(idx[i]);
    }
  } else {
    for (int i = 0; i < kMapsPerStep; ++i) picks.push_back(rng.below(pool.samples.size()));
  }

  double s = 1.0;
  if (config.enable_scale) {
    double lo = config.scale_min;
    if (config.enable_crop)
      lo = std::max({lo, static_cast<double>(config.crop_height) / h0,
                     static_cast<double>(config.crop_width) / w0});
    s = lo <= config.scale_max ? rng.uniform(lo, config.scale_max) : config.scale_max;
  }
  const int h = std::max(1, static_cast<int>(std::lround(h0 * s)));
  const int w = std::max(1, static_cast<int>(std::lround(w0 * s)));
  const int ch = config.enable_crop ? config.crop_height : h;
  const int cw = config.enable_crop ? config.crop_width : w;
  require(h >= ch && w >= cw, "image '" + sample.id + "' (" + std::to_string(h) + "x" +
                                  std::to_string(w) + " after scaling) is smaller than the crop");
  const bool flip = config.enable_flip && rng.coin();
  const int top = config.enable_crop ? static_cast<int>(rng.below(h - ch + 1)) : 0;
  const int left = config.enable_crop ? static_cast<int>(rng.below(w - cw + 1)) : 0;

  TrainBatch batch;
  batch.id = sample.id;
  batch.conditioning_enabled = pool.conditioning_enabled;
  const bool resized = (h != h0 || w != w0);
  batch.image = crop_flip(resized ? resize_bilinear(sample.image, h, w) : sample.image, top, left,
                          ch, cw, flip);
  for (size_t i : picks) {
    const GranularitySample& src = pool.samples[i];
    GranularitySample out;
    out.granularity = src.granularity;
    out.subset = src.subset;
    out.edge_map = crop_flip(resized ? resize_nearest(src.edge_map, h, w) : src.edge_map, top,
                             left, ch, cw, flip);
    batch.samples.push_back(std::move(out));
  }
  return batch;
}

fs::path DatasetManifest::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : root / p;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.root = path.has_parent_path() ? path.parent_path() : fs::path(".");
  try {
    m.split = j.at("split").get<std::string>();
    const auto& b = j.at("granularity_bounds");
    require(b.is_array() && b.size() == 2, "granularity_bounds must be [min, max]");
    m.granularity_bounds = {b[0].get<int64_t>(), b[1].get<int64_t>()};
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.image = e.at("image").get<std::string>();
      for (const auto& a : e.at("annotations")) entry.annotations.emplace_back(a.get<std::string>());
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }
  require(m.granularity_bounds.count_min >= 0 &&
              m.granularity_bounds.count_min <= m.granularity_bounds.count_max,
          "manifest granularity bounds must satisfy 0 <= min <= max");
  for (const auto& e : m.entries) {
    if (!fs::exists(m.resolve(e.image))) throw IoError("missing image " + e.image.string());
    for (const auto& a : e.annotations)
      if (!fs::exists(m.resolve(a))) throw IoError("missing annotation " + a.string());
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json j;
  j["split"] = manifest.split;
  j["granularity_bounds"] = {manifest.granularity_bounds.count_min,
                             manifest.granularity_bounds.count_max};
  j["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    json a = json::array();
    for (const auto& p : e.annotations) a.push_back(p.generic_string());
    j["entries"].push_back({{"id", e.id}, {"image", e.image.generic_string()}, {"annotations", a}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

AnnotatedImage load_entry(const DatasetManifest& manifest, size_t index) {
  require(index < manifest.entries.size(), "manifest index out of range");
  const ManifestEntry& e = manifest.entries[index];
  AnnotatedImage s;
  s.id = e.id;
  s.image = read_rgb_png(manifest.resolve(e.image));
  for (const auto& a : e.annotations) s.annotations.push_back(read_edge_png(manifest.resolve(a)));
  s.validate();
  return s;
}

std::vector<AnnotatedImage> load_all(const DatasetManifest& manifest) {
  std::vector<AnnotatedImage> out;
  out.reserve(manifest.entries.size());
  for (size_t i = 0; i < manifest.entries.size(); ++i) out.push_back(load_entry(manifest, i));
  return out;
}

GranularityBounds compute_granularity_bounds(std::span<const AnnotatedImage> samples) {
  require(!samples.empty(), "compute_granularity_bounds: no samples");
  int64_t lo = std::numeric_limits<int64_t>::max();
  int64_t hi = 0;
  for (const auto& s : samples) {
    s.validate();
    const int k = static_cast<int>(s.annotations.size());
    std::vector<AnnotatorSubset> subsets =
        k >= 2 ? enumerate_label_subsets(k) : std::vector<AnnotatorSubset>{{0}};
    for (const auto& sub : subsets) {
      const auto c = static_cast<int64_t>(count_edges(combine_labels(s.annotations, sub)));
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  return {lo, hi};
}

}  // namespace ged
