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

// Frozen pixel <-> latent codec.
//
// The analytic codec works on the signed luminance s = 2 * lum - 1. Every 8x8
// block is summarized by a 2x2 Haar analysis of its four 4x4 quadrant means:
//
//   ch0  block mean of s
//   ch1  right minus left   (horizontal response)
//   ch2  bottom minus top   (vertical response)
//   ch3  main minus anti-diagonal quadrants
//
// each multiplied by a fixed standardization constant. Encoding is linear in s.
// Decoding inverts the Haar step back to quadrant means, interpolates them
// bilinearly to full resolution and applies a fixed contrast curve
// tanh(gain * (u - pivot)) to produce the [-1, 1] output that the edge
// read-out maps to [0, 1] with (x + 1) / 2.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "ged/autograd.hpp"
#include "ged/image.hpp"

namespace ged {

inline constexpr int kLatentChannels = 4;
inline constexpr int kLatentDownsample = 8;

/// Channel-last (h, w, 4) latent grid at 1/8 of the source resolution.
struct LatentMap {
  int height = 0;  // latent rows
  int width = 0;   // latent columns
  std::vector<double> data;
  int source_height = 0;  // unpadded pixel size the latent was made from
  int source_width = 0;

  LatentMap() = default;
  LatentMap(int h, int w, int src_h, int src_w)
      : height(h), width(w), data(static_cast<size_t>(h) * w * kLatentChannels, 0.0),
        source_height(src_h), source_width(src_w) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * kLatentChannels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * kLatentChannels + c];
  }
  bool all_finite() const;
  bool operator==(const LatentMap&) const = default;
};

/// [4, h, w] tensor view used by the network.
Tensor to_chw(const LatentMap& latent);
LatentMap from_chw(const Tensor& chw, int source_height, int source_width);

enum class CodecKind { kAnalytic, kTinyTrainable };

std::string to_string(CodecKind kind);
CodecKind codec_kind_from_string(const std::string& name);

struct CodecConfig {
  CodecKind kind = CodecKind::kAnalytic;
  int channels = kLatentChannels;
  int downsample = kLatentDownsample;
};

/// Everything that determines the codec's mapping; serialized in checkpoints.
struct CodecConstants {
  std::array<double, 3> luma_weights{0.299, 0.587, 0.114};
  std::array<double, 4> channel_scale{1.0, 2.0, 2.0, 2.0};
  double edge_gain = 14.0;
  double edge_pivot = -0.8;

  bool operator==(const CodecConstants&) const = default;
};

class LatentCodec {
 public:
  explicit LatentCodec(CodecConfig config = {}, CodecConstants constants = {});

  const CodecConfig& config() const { return config_; }
  const CodecConstants& constants() const { return constants_; }

  /// Image with both dimensions divisible by 8.
  LatentMap encode_image(const RgbImage& image) const;
  /// Edge map replicated to three channels and rescaled to [-1, 1] first.
  LatentMap encode_edge(const BinaryMap& edge_map) const;
  /// Linear core: encodes an already signed single-channel plane.
  LatentMap encode_signed(const Plane<double>& signed_luma) const;

  /// Decodes to the three [-1, 1] output channels (identical for this codec).
  std::array<Plane<double>, 3> decode_rgb(const LatentMap& latent) const;
  /// Channel mean, (x + 1) / 2, clamp, then crop to the source shape.
  ProbMap decode_to_edge(const LatentMap& latent) const;
  /// Differentiable edge read-out of a [4, h, w] latent; returns [8h, 8w].
  Var decode_to_edge(const Var& latent_chw) const;

 private:
  CodecConfig config_;
  CodecConstants constants_;
};

/// Pads on the bottom/right by reflection so both sides are multiples of `multiple`.
RgbImage pad_reflect(const RgbImage& image, int multiple = kLatentDownsample);

}  // namespace ged
