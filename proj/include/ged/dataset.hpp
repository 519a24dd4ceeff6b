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

// Multi-annotator edge datasets: label combination, granularity
// normalization, training batches and the on-disk manifest.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ged/image.hpp"
#include "ged/rng.hpp"

namespace ged {

/// An RGB image with K >= 1 binary annotator maps of the same size.
struct AnnotatedImage {
  std::string id;
  RgbImage image;
  std::vector<BinaryMap> annotations;

  /// Throws ValidationError when K == 0, shapes differ or a map is not 0/1.
  void validate() const;
};

/// Zero-based annotator indices, ascending.
using AnnotatorSubset = std::vector<int>;

/// Granularity of a training target; std::nullopt means conditioning is off.
using Granularity = std::optional<double>;

struct GranularitySample {
  BinaryMap edge_map;
  Granularity granularity;
  AnnotatorSubset subset;
};

/// All subsets of {0..k-1} with at least two members, in lexicographic order.
/// There are 2^k - k - 1 of them. Throws for k < 2.
std::vector<AnnotatorSubset> enumerate_label_subsets(int k);

/// Pixel-wise OR of the selected maps.
BinaryMap combine_labels(std::span<const BinaryMap> annotations, const AnnotatorSubset& subset);

/// Min-max normalizes edge-pixel counts to [0, 1]. Returns std::nullopt when
/// the counts are all equal (degenerate granularity).
std::optional<std::vector<double>> normalize_counts(std::span<const size_t> counts);

/// Granularity of each combined map. In single-label mode, or when every map
/// has the same count, the result is std::nullopt and callers must bypass
/// granularity conditioning.
std::optional<std::vector<double>> compute_granularities(std::span<const BinaryMap> maps,
                                                         bool single_label_mode = false);

/// Combined labels of one image with their full-image granularities.
struct LabelPool {
  std::vector<GranularitySample> samples;
  bool conditioning_enabled = false;
};

LabelPool build_label_pool(const AnnotatedImage& sample);

struct AugmentConfig {
  int crop_height = 320;
  int crop_width = 320;
  bool enable_scale = true;
  bool enable_flip = true;
  bool enable_crop = true;
  double scale_min = 0.8;
  double scale_max = 1.2;
};

/// One image crop paired with the edge maps drawn for a training step.
struct TrainBatch {
  std::string id;
  RgbImage image;
  std::vector<GranularitySample> samples;
  bool conditioning_enabled = false;
};

inline constexpr int kMapsPerStep = 4;

/// Draws kMapsPerStep labels from the pool (without replacement when the pool
/// is large enough) and applies one shared scale / flip / crop to the image
/// and every map. Granularities are inherited from the full-image pool.
TrainBatch train_batch(const AnnotatedImage& sample, const LabelPool& pool, Rng& rng,
                       const AugmentConfig& config);

struct GranularityBounds {
  int64_t count_min = 0;
  int64_t count_max = 0;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path image;
  std::vector<std::filesystem::path> annotations;
};

/// Paths are stored relative to the manifest file's directory.
struct DatasetManifest {
  std::string split = "train";
  GranularityBounds granularity_bounds;
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory relative paths resolve against

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// Reads one entry's image and annotations from disk.
AnnotatedImage load_entry(const DatasetManifest& manifest, size_t index);
std::vector<AnnotatedImage> load_all(const DatasetManifest& manifest);

/// Dataset-wide edge-pixel count bounds over every combined label.
GranularityBounds compute_granularity_bounds(std::span<const AnnotatedImage> samples);

struct SynthConfig {
  int size = 128;
  std::string split = "train";
};

/// Writes a deterministic corpus of shapes on textured backgrounds with four
/// nested annotation tiers (object contours, parts, stripes, background
/// patches) whose edge counts strictly increase, then the manifest. Returns
/// the manifest; its file is `out_dir / "manifest.json"`.
DatasetManifest generate_synthetic_corpus(int n_images, uint64_t seed,
                                          const std::filesystem::path& out_dir,
                                          const SynthConfig& config = {});

/// Renders one synthetic image in memory (used by the generator).
AnnotatedImage render_synthetic_image(Rng& rng, int size, const std::string& id);

}  // namespace ged
