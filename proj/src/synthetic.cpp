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

// Synthetic multi-tier corpus.
//
// Each image is described by four nested region labelings. Level 1 separates
// objects from the background; level 2 adds an inner part per object; level 3
// adds a stripe across each object; level 4 adds faint background patches.
// Annotation tier k marks the boundaries of the level-k labeling, so tiers are
// nested and the rendered contrast of the boundaries falls with k.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "ged/dataset.hpp"

namespace ged {

namespace {

constexpr int kTiers = 4;

struct Shape {
  double cx, cy;
  double ra, rb;  // ellipse radii or polygon circumradius (ra)
  double angle;
  bool polygon;
  std::vector<std::pair<double, double>> verts;  // polygon, counter-clockwise

  bool contains(double x, double y) const {
    if (!polygon) {
      const double c = std::cos(angle), s = std::sin(angle);
      const double dx = x - cx, dy = y - cy;
      const double u = (c * dx + s * dy) / ra;
      const double v = (-s * dx + c * dy) / rb;
      return u * u + v * v <= 1.0;
    }
    for (size_t i = 0; i < verts.size(); ++i) {
      const auto [x0, y0] = verts[i];
      const auto [x1, y1] = verts[(i + 1) % verts.size()];
      if ((x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < 0) return false;
    }
    return true;
  }
};

Shape random_shape(Rng& rng, double cx, double cy, double r_lo, double r_hi, bool allow_polygon) {
  Shape s{};
  s.cx = cx;
  s.cy = cy;
  s.ra = rng.uniform(r_lo, r_hi);
  s.rb = s.ra * rng.uniform(0.55, 1.0);
  s.angle = rng.uniform(0.0, std::numbers::pi);
  s.polygon = allow_polygon && rng.coin(0.4);
  if (s.polygon) {
    const int n = rng.range(3, 6);
    std::vector<double> angles;
    for (int i = 0; i < n; ++i) angles.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    std::sort(angles.begin(), angles.end());
    for (double a : angles) s.verts.emplace_back(cx + s.ra * std::cos(a), cy + s.ra * std::sin(a));
  }
  return s;
}

// Signed offset of magnitude in [lo, hi] that keeps `base + offset` in range.
double contrast(Rng& rng, double base, double lo, double hi) {
  const double m = rng.uniform(lo, hi);
  if (base + m > 0.95) return -m;
  if (base - m < 0.05) return m;
  return rng.coin() ? m : -m;
}

BinaryMap boundaries(const std::vector<int64_t>& labels, int size) {
  BinaryMap out(size, size, 0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int64_t l = labels[static_cast<size_t>(y) * size + x];
      const bool right = x + 1 < size && labels[static_cast<size_t>(y) * size + x + 1] != l;
      const bool down = y + 1 < size && labels[static_cast<size_t>(y + 1) * size + x] != l;
      out.at(y, x) = (right || down) ? 1 : 0;
    }
  return out;
}

}  // namespace

AnnotatedImage render_synthetic_image(Rng& rng, int size, const std::string& id) {
  require(size >= 32, "synthetic images must be at least 32 pixels");
  const double sz = size;
  for (;;) {
    const double bg = rng.uniform(0.3, 0.7);
    std::vector<double> tint(3);
    for (auto& t : tint) t = rng.uniform(-0.05, 0.05);

    // Background patches (level 4).
    const int n_patches = rng.range(2, 3);
    std::vector<std::pair<Shape, double>> patches;
    for (int i = 0; i < n_patches; ++i) {
      Shape s = random_shape(rng, rng.uniform(0, sz), rng.uniform(0, sz), 0.12 * sz, 0.3 * sz, false);
      patches.emplace_back(std::move(s), contrast(rng, bg, 0.07, 0.1));
    }

    // Objects (level 1) with a part (level 2) and a stripe (level 3) each.
    struct Object {
      Shape body;
      double offset;
      Shape part;
      double part_offset;
      double nx, ny, stripe_c, stripe_hw, stripe_offset;
    };
    const int n_objects = rng.range(1, 3);
    std::vector<Object> objects;
    for (int i = 0; i < n_objects; ++i) {
      Object o{};
      const double r = rng.uniform(0.14 * sz, 0.28 * sz);
      const double cx = rng.uniform(0.2 * sz, 0.8 * sz);
      const double cy = rng.uniform(0.2 * sz, 0.8 * sz);
      o.body = random_shape(rng, cx, cy, r, r, true);
      o.offset = contrast(rng, bg, 0.3, 0.42);
      const double base = bg + o.offset;
      o.part = random_shape(rng, cx + rng.uniform(-0.15, 0.15) * r,
                            cy + rng.uniform(-0.15, 0.15) * r, 0.25 * r, 0.42 * r, false);
      o.part_offset = contrast(rng, base, 0.18, 0.24);
      const double a = rng.uniform(0.0, std::numbers::pi);
      o.nx = std::cos(a);
      o.ny = std::sin(a);
      o.stripe_c = o.nx * cx + o.ny * cy + rng.uniform(-0.4, 0.4) * r;
      o.stripe_hw = rng.uniform(1.5, 3.0);
      o.stripe_offset = contrast(rng, base, 0.11, 0.15);
      objects.push_back(std::move(o));
    }

    const size_t n = static_cast<size_t>(size) * size;
    std::vector<std::vector<int64_t>> levels(kTiers, std::vector<int64_t>(n, 0));
    std::vector<double> lum(n, bg);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const size_t p = static_cast<size_t>(y) * size + x;
        int obj = -1;
        for (int i = 0; i < n_objects; ++i)
          if (objects[i].body.contains(px, py)) obj = i;  // later objects occlude
        int64_t l1 = obj + 1, part = 0, stripe = 0, patch = 0;
        double v = bg;
        if (obj >= 0) {
          const Object& o = objects[obj];
          v += o.offset;
          if (o.part.contains(px, py)) {
            part = 1;
            v += o.part_offset;
          }
          if (std::abs(o.nx * px + o.ny * py - o.stripe_c) <= o.stripe_hw) {
            stripe = 1;
            v += o.stripe_offset;
          }
        } else {
          for (int i = 0; i < n_patches; ++i)
            if (patches[i].first.contains(px, py)) patch = i + 1;
          if (patch) v += patches[patch - 1].second;
        }
        levels[0][p] = l1;
        levels[1][p] = l1 * 2 + part;
        levels[2][p] = levels[1][p] * 2 + stripe;
        levels[3][p] = levels[2][p] * 8 + patch;
        lum[p] = v;
      }
    }

    AnnotatedImage out;
    out.id = id;
    size_t prev = 0;
    bool ok = true;
    for (int k = 0; k < kTiers; ++k) {
      BinaryMap tier = boundaries(levels[k], size);
      const size_t c = count_edges(tier);
      if (c <= prev) ok = false;
      prev = c;
      out.annotations.push_back(std::move(tier));
    }
    if (!ok) continue;  // redraw until every tier adds edges

    const double fx = rng.uniform(0.05, 0.2), fy = rng.uniform(0.05, 0.2);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    out.image = RgbImage(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const size_t p = static_cast<size_t>(y) * size + x;
        const double texture = 0.015 * std::sin(fx * x + fy * y + phase);
        for (int c = 0; c < 3; ++c)
          out.image.at(y, x, c) =
              std::clamp(lum[p] + tint[c] + texture + 0.01 * rng.normal(), 0.0, 1.0);
      }
    return out;
  }
}

DatasetManifest generate_synthetic_corpus(int n_images, uint64_t seed,
                                          const std::filesystem::path& out_dir,
                                          const SynthConfig& config) {
  require(n_images >= 1, "synthetic corpus needs at least one image");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "edges");
  Rng rng(seed);
  DatasetManifest manifest;
  manifest.split = config.split;
  manifest.root = out_dir;
  std::vector<AnnotatedImage> samples;
  for (int i = 0; i < n_images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s_%04d", config.split.c_str(), i);
    AnnotatedImage s = render_synthetic_image(rng, config.size, id);
    ManifestEntry e;
    e.id = s.id;
    e.image = fs::path("images") / (s.id + ".png");
    write_rgb_png(out_dir / e.image, s.image);
    for (size_t k = 0; k < s.annotations.size(); ++k) {
      fs::path a = fs::path("edges") / (s.id + "_t" + std::to_string(k + 1) + ".png");
      write_edge_png(out_dir / a, s.annotations[k]);
      e.annotations.push_back(a);
    }
    manifest.entries.push_back(std::move(e));
    samples.push_back(std::move(s));
  }
  manifest.granularity_bounds = compute_granularity_bounds(samples);
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace ged
