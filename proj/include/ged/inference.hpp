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

// Single-pass edge prediction and the uniform granularity sweep.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ged/conditioning.hpp"
#include "ged/denoiser.hpp"
#include "ged/latent_codec.hpp"

namespace ged {

struct EdgePrediction {
  ProbMap prob_map;
  Granularity granularity;
  std::string image_id;
};

/// g = k / (M - 1) for k = 0..M-1.
std::vector<double> sweep_grid(int m);

/// `<id>_g050.png` for g = 0.5; `<id>_gna.png` when conditioning is off.
std::string prediction_filename(const std::string& image_id, const Granularity& g);

class Predictor {
 public:
  Predictor(const Denoiser& model, const LatentCodec& codec) : model_(model), codec_(codec) {}

  /// Pads reflectively so the latent fits the U-Net's downsampling, encodes,
  /// runs the network once at t = 1, decodes and crops back to the input size.
  EdgePrediction predict(const RgbImage& image, const Granularity& g, const TextEmbedding& text,
                         const std::string& image_id = {}) const;
  /// One prediction per grid value, ordered by g.
  std::vector<EdgePrediction> sweep(const RgbImage& image, int m, const TextEmbedding& text,
                                    const std::string& image_id = {}) const;

 private:
  const Denoiser& model_;
  const LatentCodec& codec_;
};

/// Writes the 16-bit PNG under `dir` and returns its path.
std::filesystem::path write_prediction(const std::filesystem::path& dir,
                                       const EdgePrediction& prediction);

}  // namespace ged
