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

#include "ged/conditioning.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

namespace ged {

namespace {

constexpr uint64_t kNullCaptionSeed = 0x6e756c6c63617074ull;  // "nullcapt"

}  // namespace

TextEmbedding embed_caption(const std::string& caption, int tokens, int width) {
  require(tokens > 0 && width > 1, "text embedding needs tokens > 0 and width > 1");
  const uint64_t seed =
      caption.empty() ? kNullCaptionSeed : stable_hash(caption.data(), caption.size());
  Rng rng(seed);
  Tensor t({tokens, width});
  for (int r = 0; r < tokens; ++r) {
    double* row = t.data() + static_cast<size_t>(r) * width;
    double mu = 0.0;
    for (int c = 0; c < width; ++c) mu += (row[c] = rng.normal());
    mu /= width;
    double var = 0.0;
    for (int c = 0; c < width; ++c) var += (row[c] - mu) * (row[c] - mu);
    const double inv = 1.0 / std::sqrt(var / width);
    for (int c = 0; c < width; ++c) row[c] = (row[c] - mu) * inv;
  }
  return {std::move(t), caption};
}

CaptionTable load_captions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open caption file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed caption file: " + std::string(e.what()));
  }
  require(j.is_object(), "caption file must map ids to captions");
  CaptionTable table;
  for (auto it = j.begin(); it != j.end(); ++it) table[it.key()] = it.value().get<std::string>();
  return table;
}

Tensor sinusoidal_embedding(int t, int dim, double max_period) {
  require(t >= 0, "time step must be non-negative");
  require(dim >= 2 && dim % 2 == 0, "sinusoidal embedding width must be even");
  const int half = dim / 2;
  Tensor out({dim});
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(max_period) * i / half);
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
  return out;
}

std::string to_string(GranularityStrategy s) {
  switch (s) {
    case GranularityStrategy::kEncoding: return "encoding";
    case GranularityStrategy::kTimeStep: return "time_step";
    case GranularityStrategy::kTextPrompt: return "text_prompt";
  }
  return "encoding";
}

GranularityStrategy granularity_strategy_from_string(const std::string& name) {
  if (name == "encoding") return GranularityStrategy::kEncoding;
  if (name == "time_step") return GranularityStrategy::kTimeStep;
  if (name == "text_prompt") return GranularityStrategy::kTextPrompt;
  throw ValidationError("unknown granularity strategy '" + name + "'");
}

int timestep_for_granularity(double g) {
  require(g >= 0.0 && g <= 1.0, "granularity must lie in [0, 1]");
  return static_cast<int>(std::lround(g * 1000.0));
}

std::string granularity_prompt(const std::string& caption, double g) {
  require(g >= 0.0 && g <= 1.0, "granularity must lie in [0, 1]");
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "Edge granularity denotes different levels of detail, please extract the "
                "edges with the granularity of %g.",
                g);
  return caption.empty() ? std::string(buf) : caption + " " + buf;
}

TimeEmbedding::TimeEmbedding(ParameterSet& ps, const std::string& group, int sinusoid_dim,
                             int out_dim, Rng& rng)
    : fc1_(Linear::create(ps, group + ".fc1", group, sinusoid_dim, out_dim, rng)),
      fc2_(Linear::create(ps, group + ".fc2", group, out_dim, out_dim, rng)),
      sinusoid_dim_(sinusoid_dim),
      out_dim_(out_dim) {}

Var TimeEmbedding::operator()(int t) const {
  Var raw = Var::constant(sinusoidal_embedding(t, sinusoid_dim_));
  return fc2_(silu(fc1_(raw)));
}

GranularityEncoder::GranularityEncoder(ParameterSet& ps, const std::string& group, int out_dim,
                                       Rng& rng)
    : fc1_(Linear::create(ps, group + ".fc1", group, 1, out_dim, rng)),
      fc2_(Linear::create(ps, group + ".fc2", group, out_dim, out_dim, rng)),
      out_dim_(out_dim) {}

Var GranularityEncoder::operator()(const Granularity& g) const {
  if (!g) return Var::constant(Tensor({out_dim_}));
  require(*g >= 0.0 && *g <= 1.0, "granularity must lie in [0, 1] or be disabled");
  return encode(Var::constant(Tensor({1}, *g)));
}

Var fuse(const Var& time_embedding, const Var& granularity_embedding) {
  require(time_embedding.shape() == granularity_embedding.shape(),
          "fuse: embedding widths differ " + shape_string(time_embedding.shape()) + " vs " +
              shape_string(granularity_embedding.shape()));
  return add(time_embedding, granularity_embedding);
}

Tensor fuse(const Tensor& time_embedding, const Tensor& granularity_embedding) {
  require(time_embedding.same_shape(granularity_embedding), "fuse: embedding widths differ");
  Tensor out(time_embedding.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = time_embedding[i] + granularity_embedding[i];
  return out;
}

}  // namespace ged
