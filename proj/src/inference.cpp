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

#include "ged/inference.hpp"

#include <cmath>
#include <cstdio>

namespace ged {

std::vector<double> sweep_grid(int m) {
  require(m >= 2, "a sweep needs at least two granularities");
  std::vector<double> grid(static_cast<size_t>(m));
  for (int k = 0; k < m; ++k) grid[k] = static_cast<double>(k) / (m - 1);
  return grid;
}

std::string prediction_filename(const std::string& image_id, const Granularity& g) {
  if (!g) return image_id + "_gna.png";
  require(*g >= 0.0 && *g <= 1.0, "granularity must lie in [0, 1]");
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03ld", std::lround(*g * 100.0));
  return image_id + "_g" + buf + ".png";
}

EdgePrediction Predictor::predict(const RgbImage& image, const Granularity& g,
                                  const TextEmbedding& text, const std::string& image_id) const {
  require(image.height > 0 && image.width > 0, "empty image");
  const int multiple = kLatentDownsample << (model_.config().stages() - 1);
  const RgbImage padded = pad_reflect(image, multiple);
  LatentMap z = codec_.encode_image(padded);
  z.source_height = image.height;
  z.source_width = image.width;
  const LatentMap out = model_.predict_latent(z, kPredictionTimestep, text, g);
  return {codec_.decode_to_edge(out), g, image_id};
}

std::vector<EdgePrediction> Predictor::sweep(const RgbImage& image, int m,
                                             const TextEmbedding& text,
                                             const std::string& image_id) const {
  std::vector<EdgePrediction> out;
  for (double g : sweep_grid(m)) out.push_back(predict(image, g, text, image_id));
  return out;
}

std::filesystem::path write_prediction(const std::filesystem::path& dir,
                                       const EdgePrediction& prediction) {
  require(!prediction.image_id.empty(), "prediction has no image id");
  std::filesystem::create_directories(dir);
  const auto path = dir / prediction_filename(prediction.image_id, prediction.granularity);
  write_prob_png16(path, prediction.prob_map);
  return path;
}

}  // namespace ged
