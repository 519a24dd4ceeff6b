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

// Losses, the predicted-granularity read-out and the optimization loop.

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "ged/dataset.hpp"
#include "ged/denoiser.hpp"
#include "ged/latent_codec.hpp"

namespace ged {

struct LossBreakdown {
  double mse = 0.0;
  double ord_pairwise = 0.0;
  double ord_gran = 0.0;
  double total = 0.0;
};

struct OptimConfig {
  double lr_start = 5e-5;
  double lr_end = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;   // <= 0 disables clipping
  int accumulation = 4;     // micro-batches per optimizer update
  int total_steps = 5000;   // micro-batches

  void validate() const;
  /// Linear interpolation from lr_start at step 0 to lr_end at the last step.
  double lr_at(int step) const;
};

// Plain-value loss terms, used as oracles and for reporting.
double loss_mse(const LatentMap& pred, const LatentMap& target);
/// L2 distance of every unordered pair (i < j), in lexicographic pair order.
std::vector<double> pairwise_distances(const std::vector<LatentMap>& latents);
/// (sum of decoded pixels - count_min) / (count_max - count_min), not clamped;
/// nullopt when the bounds are degenerate.
std::optional<double> predicted_granularity(const LatentMap& pred, const LatentCodec& codec,
                                            const GranularityBounds& bounds);
std::pair<double, double> loss_ord(const std::vector<LatentMap>& pred,
                                   const std::vector<LatentMap>& target,
                                   const std::vector<double>& pred_gran,
                                   const std::vector<double>& target_gran);

// Differentiable counterparts.
Var loss_mse(const Var& pred, const Var& target);
std::vector<Var> pairwise_distances(const std::vector<Var>& latents);
Var predicted_granularity(const Var& pred_chw, const LatentCodec& codec,
                          const GranularityBounds& bounds);
std::pair<Var, Var> loss_ord(const std::vector<Var>& pred, const std::vector<Var>& target,
                             const std::vector<Var>& pred_gran,
                             const std::vector<double>& target_gran);

/// Encoded inputs of one micro-batch: the image latent and the 4 edge latents.
struct EncodedBatch {
  Tensor image_latent;               // [4, h, w]
  std::vector<Tensor> edge_latents;  // each [4, h, w]
  std::vector<Granularity> granularities;
  bool conditioning_enabled = false;
};

EncodedBatch encode_batch(const TrainBatch& batch, const LatentCodec& codec);

struct LossOptions {
  GranularityBounds bounds;
  /// Off reproduces a no-gradient decode for the granularity term.
  bool differentiable_granularity = true;
};

/// Forward pass over the 4 samples and the total objective. The returned Var
/// is the graph root; the breakdown holds its parts.
std::pair<Var, LossBreakdown> compute_loss(const Denoiser& model, const LatentCodec& codec,
                                           const EncodedBatch& batch, const TextEmbedding& text,
                                           const LossOptions& options);

/// Decoupled-weight-decay Adam over the trainable parameters.
class AdamW {
 public:
  explicit AdamW(OptimConfig config) : config_(std::move(config)) {}
  /// Averages accumulated grads over `micro_batches`, clips, and updates
  /// every parameter with requires_grad set. Returns the pre-clip grad norm.
  double update(ParameterSet& params, double lr, int micro_batches);
  int updates() const { return updates_; }
  const OptimConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  OptimConfig config_;
  std::map<std::string, Moments> state_;
  int updates_ = 0;
};

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

class Trainer {
 public:
  Trainer(Denoiser& model, const LatentCodec& codec, OptimConfig optim, LossOptions loss);

  /// One micro-batch: forward, backward, and an update once `accumulation`
  /// micro-batches have been seen. Throws NumericError on a non-finite loss.
  StepRecord train_step(const TrainBatch& batch, const TextEmbedding& text);
  int step() const { return step_; }
  const AdamW& optimizer() const { return optimizer_; }

 private:
  Denoiser& model_;
  const LatentCodec& codec_;
  AdamW optimizer_;
  LossOptions loss_;
  int step_ = 0;
  int pending_ = 0;
};

struct TrainRunConfig {
  OptimConfig optim;
  AugmentConfig augment;
  FinetuneMode mode = FinetuneMode::kPartial;
  bool differentiable_granularity = true;
  uint64_t seed = 0;
};

/// Runs `optim.total_steps` micro-batches over `corpus`, visiting images in a
/// reshuffled order each epoch. `on_step` sees every record as it is made.
std::vector<StepRecord> train(Denoiser& model, const LatentCodec& codec,
                              const std::vector<AnnotatedImage>& corpus,
                              const GranularityBounds& bounds, const CaptionTable& captions,
                              const TrainRunConfig& config,
                              const std::function<void(const StepRecord&)>& on_step = {});

}  // namespace ged
