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

#include "ged/training.hpp"

#include <cmath>
#include <sstream>

namespace ged {

namespace {

void require_same(const LatentMap& a, const LatentMap& b) {
  require(a.height == b.height && a.width == b.width, "latent shapes differ");
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

bool degenerate(const GranularityBounds& b) { return b.count_max <= b.count_min; }

}  // namespace

void OptimConfig::validate() const {
  require(lr_start > 0.0 && lr_end > 0.0 && lr_end <= lr_start,
          "learning rates must satisfy 0 < lr_end <= lr_start");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(eps > 0.0 && weight_decay >= 0.0, "eps must be positive and weight decay nonnegative");
  require(accumulation >= 1 && total_steps >= 1, "accumulation and total_steps must be >= 1");
}

double OptimConfig::lr_at(int step) const {
  if (total_steps <= 1) return lr_start;
  const double f = std::clamp(static_cast<double>(step) / (total_steps - 1), 0.0, 1.0);
  return lr_start + (lr_end - lr_start) * f;
}

double loss_mse(const LatentMap& pred, const LatentMap& target) {
  require_same(pred, target);
  double s = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.data.size());
}

std::vector<double> pairwise_distances(const std::vector<LatentMap>& latents) {
  require(latents.size() >= 2, "pairwise distances need at least two latents");
  std::vector<double> out;
  for (size_t i = 0; i < latents.size(); ++i)
    for (size_t j = i + 1; j < latents.size(); ++j) {
      require_same(latents[i], latents[j]);
      out.push_back(l2(latents[i].data, latents[j].data));
    }
  return out;
}

std::optional<double> predicted_granularity(const LatentMap& pred, const LatentCodec& codec,
                                            const GranularityBounds& bounds) {
  if (degenerate(bounds)) return std::nullopt;
  const ProbMap map = codec.decode_to_edge(pred);
  double s = 0.0;
  for (double v : map.px) s += v;
  return (s - static_cast<double>(bounds.count_min)) /
         static_cast<double>(bounds.count_max - bounds.count_min);
}

std::pair<double, double> loss_ord(const std::vector<LatentMap>& pred,
                                   const std::vector<LatentMap>& target,
                                   const std::vector<double>& pred_gran,
                                   const std::vector<double>& target_gran) {
  require(pred.size() == target.size() && pred.size() == pred_gran.size() &&
              pred.size() == target_gran.size(),
          "ordinal loss inputs are misaligned");
  const auto dp = pairwise_distances(pred);
  const auto dt = pairwise_distances(target);
  double pairwise = 0.0;
  for (size_t i = 0; i < dp.size(); ++i) pairwise += (dp[i] - dt[i]) * (dp[i] - dt[i]);
  double gran = 0.0;
  for (size_t i = 0; i < pred_gran.size(); ++i)
    gran += (pred_gran[i] - target_gran[i]) * (pred_gran[i] - target_gran[i]);
  return {pairwise / dp.size(), gran / pred_gran.size()};
}

Var loss_mse(const Var& pred, const Var& target) {
  require(pred.shape() == target.shape(), "mse: shape mismatch " + shape_string(pred.shape()) +
                                              " vs " + shape_string(target.shape()));
  return mean(square(sub(pred, target)));
}

std::vector<Var> pairwise_distances(const std::vector<Var>& latents) {
  require(latents.size() >= 2, "pairwise distances need at least two latents");
  std::vector<Var> out;
  for (size_t i = 0; i < latents.size(); ++i)
    for (size_t j = i + 1; j < latents.size(); ++j) {
      require(latents[i].shape() == latents[j].shape(), "latent shapes differ");
      out.push_back(sqrt_op(sum(square(sub(latents[i], latents[j])))));
    }
  return out;
}

Var predicted_granularity(const Var& pred_chw, const LatentCodec& codec,
                          const GranularityBounds& bounds) {
  require(!degenerate(bounds), "granularity bounds are degenerate");
  const double span = static_cast<double>(bounds.count_max - bounds.count_min);
  Var total = sum(codec.decode_to_edge(pred_chw));
  return scale(add_scalar(total, -static_cast<double>(bounds.count_min)), 1.0 / span);
}

std::pair<Var, Var> loss_ord(const std::vector<Var>& pred, const std::vector<Var>& target,
                             const std::vector<Var>& pred_gran,
                             const std::vector<double>& target_gran) {
  require(pred.size() == target.size() && pred.size() == pred_gran.size() &&
              pred.size() == target_gran.size(),
          "ordinal loss inputs are misaligned");
  const auto dp = pairwise_distances(pred);
  const auto dt = pairwise_distances(target);
  std::vector<Var> pair_terms, gran_terms;
  for (size_t i = 0; i < dp.size(); ++i) pair_terms.push_back(square(sub(dp[i], dt[i])));
  for (size_t i = 0; i < pred_gran.size(); ++i)
    gran_terms.push_back(square(add_scalar(pred_gran[i], -target_gran[i])));
  return {scale(sum_scalars(pair_terms), 1.0 / pair_terms.size()),
          scale(sum_scalars(gran_terms), 1.0 / gran_terms.size())};
}

EncodedBatch encode_batch(const TrainBatch& batch, const LatentCodec& codec) {
  require(!batch.samples.empty(), "batch has no edge maps");
  EncodedBatch out;
  out.image_latent = to_chw(codec.encode_image(batch.image));
  for (const auto& s : batch.samples) {
    out.edge_latents.push_back(to_chw(codec.encode_edge(s.edge_map)));
    out.granularities.push_back(batch.conditioning_enabled ? s.granularity : std::nullopt);
  }
  out.conditioning_enabled = batch.conditioning_enabled;
  return out;
}

std::pair<Var, LossBreakdown> compute_loss(const Denoiser& model, const LatentCodec& codec,
                                           const EncodedBatch& batch, const TextEmbedding& text,
                                           const LossOptions& options) {
  const size_t n = batch.edge_latents.size();
  require(n >= 1 && batch.granularities.size() == n, "encoded batch is inconsistent");
  const Var image = Var::constant(batch.image_latent);
  std::vector<Var> preds, targets, mse_terms;
  for (size_t k = 0; k < n; ++k) {
    preds.push_back(model.forward(image, kPredictionTimestep, text, batch.granularities[k]));
    targets.push_back(Var::constant(batch.edge_latents[k]));
    mse_terms.push_back(loss_mse(preds.back(), targets.back()));
  }
  const Var mse = scale(sum_scalars(mse_terms), 1.0 / n);

  Var ord_pairwise = Var::constant(Tensor({1}, 0.0));
  Var ord_gran = Var::constant(Tensor({1}, 0.0));
  if (batch.conditioning_enabled && n >= 2) {
    std::vector<Var> ghat;
    std::vector<double> g;
    const bool use_gran = !degenerate(options.bounds);
    for (size_t k = 0; k < n; ++k) {
      require(batch.granularities[k].has_value(), "conditioned sample lacks a granularity");
      g.push_back(*batch.granularities[k]);
      if (!use_gran) {
        ghat.push_back(Var::constant(Tensor({1}, g.back())));
      } else if (options.differentiable_granularity) {
        ghat.push_back(predicted_granularity(preds[k], codec, options.bounds));
      } else {
        NoGradGuard no_grad;
        ghat.push_back(Var::constant(
            predicted_granularity(Var::constant(preds[k].value()), codec, options.bounds)
                .value()));
      }
    }
    std::tie(ord_pairwise, ord_gran) = loss_ord(preds, targets, ghat, g);
  }
  Var total = sum_scalars({mse, ord_pairwise, ord_gran});
  LossBreakdown b{mse.item(), ord_pairwise.item(), ord_gran.item(), total.item()};
  return {total, b};
}

double AdamW::update(ParameterSet& params, double lr, int micro_batches) {
  require(micro_batches >= 1, "update needs at least one micro-batch");
  const double inv = 1.0 / micro_batches;
  double sq = 0.0;
  for (const auto& p : params.all()) {
    if (!p.var.requires_grad()) continue;
    const Tensor g = p.var.grad();
    for (double v : g.values()) sq += (v * inv) * (v * inv);
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  double clip = 1.0;
  if (config_.clip_norm > 0.0 && norm > config_.clip_norm) clip = config_.clip_norm / norm;

  ++updates_;
  const double bc1 = 1.0 - std::pow(config_.beta1, updates_);
  const double bc2 = 1.0 - std::pow(config_.beta2, updates_);
  for (auto& p : params.all()) {
    if (!p.var.requires_grad()) continue;
    const Tensor g = p.var.grad();
    Tensor& w = p.var.mutable_value();
    Moments& st = state_[p.name];
    if (st.m.empty()) st.m.assign(w.size(), 0.0), st.v.assign(w.size(), 0.0);
    for (size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * inv * clip;
      st.m[i] = config_.beta1 * st.m[i] + (1.0 - config_.beta1) * gi;
      st.v[i] = config_.beta2 * st.v[i] + (1.0 - config_.beta2) * gi * gi;
      const double mh = st.m[i] / bc1, vh = st.v[i] / bc2;
      w[i] -= lr * (mh / (std::sqrt(vh) + config_.eps) + config_.weight_decay * w[i]);
    }
    p.var.zero_grad();
  }
  return norm;
}

Trainer::Trainer(Denoiser& model, const LatentCodec& codec, OptimConfig optim, LossOptions loss)
    : model_(model), codec_(codec), optimizer_(std::move(optim)), loss_(loss) {
  optimizer_.config().validate();
}

StepRecord Trainer::train_step(const TrainBatch& batch, const TextEmbedding& text) {
  const EncodedBatch encoded = encode_batch(batch, codec_);
  auto [total, parts] = compute_loss(model_, codec_, encoded, text, loss_);
  if (!std::isfinite(parts.total) || !std::isfinite(parts.mse) ||
      !std::isfinite(parts.ord_pairwise) || !std::isfinite(parts.ord_gran)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step_ << ": mse=" << parts.mse
        << " ord_pairwise=" << parts.ord_pairwise << " ord_gran=" << parts.ord_gran
        << " total=" << parts.total;
    throw NumericError(msg.str());
  }
  total.backward();
  const double lr = optimizer_.config().lr_at(step_);
  if (++pending_ == optimizer_.config().accumulation) {
    optimizer_.update(model_.parameters(), lr, pending_);
    pending_ = 0;
  }
  return {step_++, lr, parts};
}

std::vector<StepRecord> train(Denoiser& model, const LatentCodec& codec,
                              const std::vector<AnnotatedImage>& corpus,
                              const GranularityBounds& bounds, const CaptionTable& captions,
                              const TrainRunConfig& config,
                              const std::function<void(const StepRecord&)>& on_step) {
  require(!corpus.empty(), "training corpus is empty");
  model.apply_mask(build_finetune_mask(model, config.mode));
  Trainer trainer(model, codec, config.optim, {bounds, config.differentiable_granularity});

  std::vector<LabelPool> pools;
  std::vector<TextEmbedding> texts;
  const auto& unet = model.config();
  for (const auto& sample : corpus) {
    pools.push_back(build_label_pool(sample));
    auto it = captions.find(sample.id);
    texts.push_back(embed_caption(it == captions.end() ? std::string() : it->second,
                                  unet.text_tokens, unet.text_width));
  }

  Rng rng(config.seed);
  std::vector<size_t> order(corpus.size());
  size_t cursor = order.size();
  std::vector<StepRecord> log;
  for (int s = 0; s < config.optim.total_steps; ++s) {
    if (cursor == order.size()) {
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      cursor = 0;
    }
    const size_t idx = order[cursor++];
    const TrainBatch batch = train_batch(corpus[idx], pools[idx], rng, config.augment);
    log.push_back(trainer.train_step(batch, texts[idx]));
    if (on_step) on_step(log.back());
  }
  return log;
}

}  // namespace ged
