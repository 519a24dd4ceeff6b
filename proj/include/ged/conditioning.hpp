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

// Conditioning signals for the denoiser: caption embedding, time embedding,
// granularity embedding and their additive fusion.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "ged/dataset.hpp"
#include "ged/parameters.hpp"

namespace ged {

inline constexpr int kTextTokens = 77;
inline constexpr int kTextWidth = 1024;
/// Time step used for every single-step prediction.
inline constexpr int kPredictionTimestep = 1;

struct TextEmbedding {
  Tensor data;  // [tokens, width]
  std::string caption;
};

/// Deterministic stand-in for a frozen text encoder: a pseudo-random
/// [tokens, width] array seeded by a stable hash of the caption, each row
/// standardized to zero mean and unit variance. The empty caption maps to a
/// fixed null embedding.
TextEmbedding embed_caption(const std::string& caption, int tokens = kTextTokens,
                            int width = kTextWidth);

/// Optional sidecar {"id": caption}; absent ids get the null caption.
using CaptionTable = std::map<std::string, std::string>;
CaptionTable load_captions(const std::filesystem::path& path);

/// Sinusoidal position embedding of `t` (sin half then cos half).
Tensor sinusoidal_embedding(int t, int dim, double max_period = 10000.0);

/// How granularity reaches the network.
enum class GranularityStrategy {
  kEncoding,    // two FC layers, added to the time embedding
  kTimeStep,    // g replaces t as round(g * 1000)
  kTextPrompt,  // g is written into the caption
};

std::string to_string(GranularityStrategy s);
GranularityStrategy granularity_strategy_from_string(const std::string& name);

/// Time step used under the time-step strategy.
int timestep_for_granularity(double g);
/// Caption used under the text-prompt strategy.
std::string granularity_prompt(const std::string& caption, double g);

/// Sinusoid followed by a two-layer projection to the fused width.
class TimeEmbedding {
 public:
  TimeEmbedding() = default;
  TimeEmbedding(ParameterSet& ps, const std::string& group, int sinusoid_dim, int out_dim,
                Rng& rng);
  Var operator()(int t) const;
  int out_dim() const { return out_dim_; }

 private:
  Linear fc1_, fc2_;
  int sinusoid_dim_ = 0;
  int out_dim_ = 0;
};

/// g -> FC -> SiLU -> FC. A disabled granularity yields an exact zero vector.
class GranularityEncoder {
 public:
  GranularityEncoder() = default;
  GranularityEncoder(ParameterSet& ps, const std::string& group, int out_dim, Rng& rng);
  Var operator()(const Granularity& g) const;
  /// Same map applied to a [1] variable, for differentiating in g.
  Var encode(const Var& g) const { return fc2_(silu(fc1_(g))); }
  int out_dim() const { return out_dim_; }

 private:
  Linear fc1_, fc2_;
  int out_dim_ = 0;
};

/// f_t + f_g elementwise, nothing else.
Var fuse(const Var& time_embedding, const Var& granularity_embedding);
Tensor fuse(const Tensor& time_embedding, const Tensor& granularity_embedding);

}  // namespace ged
