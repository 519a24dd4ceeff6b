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

// Conditional U-Net mapping latent image features straight to a latent edge
// map in one evaluation. There is no noisy-latent input: the only spatial
// input is the encoded image.

#pragma once

#include <atomic>
#include <set>
#include <string>
#include <vector>

#include "ged/conditioning.hpp"
#include "ged/latent_codec.hpp"
#include "ged/parameters.hpp"

namespace ged {

struct UNetConfig {
  int base_channels = 32;
  std::vector<int> stage_multipliers{1, 2, 4};
  /// Stages (0 = full latent resolution) whose blocks cross-attend to text.
  std::vector<int> attention_stages{2};
  int in_channels = kLatentChannels;
  int out_channels = kLatentChannels;
  int text_tokens = kTextTokens;
  int text_width = kTextWidth;
  /// Width of the fused time/granularity embedding; 0 means 4 * base.
  int embed_dim = 0;
  GranularityStrategy strategy = GranularityStrategy::kEncoding;
  uint64_t init_seed = 0;

  int stages() const { return static_cast<int>(stage_multipliers.size()); }
  int channels(int stage) const { return base_channels * stage_multipliers.at(stage); }
  int fused_dim() const { return embed_dim > 0 ? embed_dim : 4 * base_channels; }
  void validate() const;
  bool operator==(const UNetConfig&) const = default;
};

enum class FinetuneMode { kPartial, kFull };

/// Partition of parameter groups into trainable and frozen.
struct FinetuneMask {
  std::set<std::string> trainable;
  std::set<std::string> frozen;

  bool is_trainable(const std::string& group) const { return trainable.count(group) > 0; }
  bool operator==(const FinetuneMask&) const = default;
};

/// The groups finetuned in partial mode: last two decoder stages, the time
/// embedding and the granularity encoder.
std::vector<std::string> default_partial_groups(const UNetConfig& config);

class Denoiser {
 public:
  explicit Denoiser(UNetConfig config);
  Denoiser(const Denoiser&) = delete;
  Denoiser& operator=(const Denoiser&) = delete;
  Denoiser(Denoiser&&) = default;
  Denoiser& operator=(Denoiser&&) = default;

  const UNetConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// One network evaluation on a [4, h, w] latent; returns [4, h, w].
  Var forward(const Var& latent_image, int timestep, const TextEmbedding& text,
              const Granularity& granularity) const;
  /// Inference convenience: no graph is recorded.
  LatentMap predict_latent(const LatentMap& latent_image, int timestep,
                           const TextEmbedding& text, const Granularity& granularity) const;

  /// Fused embedding f_t + f_g fed to every block.
  Var fused_embedding(int timestep, const Granularity& granularity) const;
  const TimeEmbedding& time_embedding() const { return time_embed_; }
  const GranularityEncoder& granularity_encoder() const { return gran_embed_; }

  /// Sets requires_grad per the mask; the mask must name every group.
  void apply_mask(const FinetuneMask& mask);
  const FinetuneMask& mask() const { return mask_; }

  /// Number of forward() calls made in this process.
  static uint64_t forward_pass_count() { return forward_passes_.load(); }

 private:
  struct ResBlock {
    Conv2d conv1, conv2;
    Linear emb_proj;
    bool has_skip = false;
    Conv2d skip;
    Var operator()(const Var& x, const Var& emb_act) const;
  };
  struct CrossAttention {
    Linear q, k, v, out;
    int dim = 0;
    Var operator()(const Var& x, const Var& text) const;
  };
  struct Stage {
    ResBlock res;
    bool has_attn = false;
    CrossAttention attn;
    bool has_resample = false;
    Conv2d resample;  // stride-2 conv (encoder) or post-upsample conv (decoder)
  };

  ResBlock make_res(const std::string& name, const std::string& group, int in, int out,
                    Rng& rng);
  CrossAttention make_attn(const std::string& name, const std::string& group, int channels,
                           Rng& rng);

  UNetConfig config_;
  ParameterSet params_;
  Conv2d conv_in_, conv_out_;
  std::vector<Stage> encoder_, decoder_;
  TimeEmbedding time_embed_;
  GranularityEncoder gran_embed_;
  FinetuneMask mask_;

  static inline std::atomic<uint64_t> forward_passes_{0};
};

/// Partial mode trains the default groups (or `groups` when given); full
/// mode trains everything. Unknown group names are rejected.
FinetuneMask build_finetune_mask(const Denoiser& model, FinetuneMode mode,
                                 const std::vector<std::string>& groups = {});

std::string to_string(FinetuneMode mode);
FinetuneMode finetune_mode_from_string(const std::string& name);

}  // namespace ged
