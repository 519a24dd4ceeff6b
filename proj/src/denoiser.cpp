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

#include "ged/denoiser.hpp"

#include <algorithm>
#include <cmath>

namespace ged {

namespace {

std::string enc_group(int s) { return "enc." + std::to_string(s); }
std::string dec_group(int d) { return "dec." + std::to_string(d); }

}  // namespace

void UNetConfig::validate() const {
  require(in_channels == kLatentChannels && out_channels == kLatentChannels,
          "U-Net input and output must have 4 channels");
  require(stages() >= 2, "U-Net needs at least two stages");
  require(base_channels >= 1, "base_channels must be positive");
  for (int m : stage_multipliers) require(m >= 1, "stage multipliers must be positive");
  for (int s : attention_stages) require(s >= 0 && s < stages(), "attention stage out of range");
  require(text_tokens >= 1 && text_width >= 2, "bad text embedding shape");
  require(fused_dim() >= 2, "embedding width too small");
}

std::vector<std::string> default_partial_groups(const UNetConfig& config) {
  const int n = config.stages();
  return {dec_group(n - 2), dec_group(n - 1), "time_embed", "gran_embed"};
}

Var Denoiser::ResBlock::operator()(const Var& x, const Var& emb_act) const {
  Var h = conv1(silu(x));
  h = add_channel_bias(h, emb_proj(emb_act));
  h = conv2(silu(h));
  return add(has_skip ? skip(x) : x, h);
}

Var Denoiser::CrossAttention::operator()(const Var& x, const Var& text) const {
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  Var tokens = transpose2d(reshape(x, {c, h * w}));  // [N, C]
  Var query = q.rows(tokens);
  Var key = k.rows(text);
  Var value = v.rows(text);
  Var scores = scale(matmul(query, transpose2d(key)), 1.0 / std::sqrt(static_cast<double>(dim)));
  Var attended = matmul(softmax_rows(scores), value);  // [N, dim]
  Var projected = out.rows(attended);                  // [N, C]
  return add(x, reshape(transpose2d(projected), {c, h, w}));
}

Denoiser::ResBlock Denoiser::make_res(const std::string& name, const std::string& group, int in,
                                      int out, Rng& rng) {
  ResBlock r;
  r.conv1 = Conv2d::create(params_, name + ".conv1", group, in, out, 3, 1, rng);
  r.emb_proj =
      Linear::create(params_, name + ".emb_proj", group, config_.fused_dim(), out, rng, 0.25);
  r.conv2 = Conv2d::create(params_, name + ".conv2", group, out, out, 3, 1, rng, 0.5);
  r.has_skip = in != out;
  if (r.has_skip) r.skip = Conv2d::create(params_, name + ".skip", group, in, out, 1, 1, rng);
  return r;
}

Denoiser::CrossAttention Denoiser::make_attn(const std::string& name, const std::string& group,
                                             int channels, Rng& rng) {
  CrossAttention a;
  a.dim = channels;
  a.q = Linear::create(params_, name + ".q", group, channels, channels, rng, std::sqrt(0.5));
  a.k = Linear::create(params_, name + ".k", group, config_.text_width, channels, rng,
                       std::sqrt(0.5));
  a.v = Linear::create(params_, name + ".v", group, config_.text_width, channels, rng,
                       std::sqrt(0.5));
  a.out = Linear::create(params_, name + ".out", group, channels, channels, rng, 0.5);
  return a;
}

Denoiser::Denoiser(UNetConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.init_seed);
  const int n = config_.stages();
  const auto has_attn = [&](int s) {
    return std::find(config_.attention_stages.begin(), config_.attention_stages.end(), s) !=
           config_.attention_stages.end();
  };

  conv_in_ = Conv2d::create(params_, "conv_in", "conv_in", config_.in_channels,
                            config_.channels(0), 3, 1, rng);
  int prev = config_.channels(0);
  for (int s = 0; s < n; ++s) {
    const std::string g = enc_group(s);
    Stage st;
    st.res = make_res(g + ".res", g, prev, config_.channels(s), rng);
    st.has_attn = has_attn(s);
    if (st.has_attn) st.attn = make_attn(g + ".attn", g, config_.channels(s), rng);
    st.has_resample = s + 1 < n;
    if (st.has_resample)
      st.resample = Conv2d::create(params_, g + ".down", g, config_.channels(s),
                                   config_.channels(s), 3, 2, rng);
    prev = config_.channels(s);
    encoder_.push_back(std::move(st));
  }
  for (int d = 0; d < n; ++d) {
    const int s = n - 1 - d;
    const std::string g = dec_group(d);
    Stage st;
    st.res = make_res(g + ".res", g, prev + config_.channels(s), config_.channels(s), rng);
    st.has_attn = has_attn(s);
    if (st.has_attn) st.attn = make_attn(g + ".attn", g, config_.channels(s), rng);
    st.has_resample = d + 1 < n;
    if (st.has_resample)
      st.resample = Conv2d::create(params_, g + ".up", g, config_.channels(s),
                                   config_.channels(s), 3, 1, rng);
    prev = config_.channels(s);
    decoder_.push_back(std::move(st));
  }
  conv_out_ = Conv2d::create(params_, "conv_out", "conv_out", config_.channels(0),
                             config_.out_channels, 3, 1, rng, 0.25);
  time_embed_ = TimeEmbedding(params_, "time_embed", config_.base_channels % 2 == 0
                                                         ? config_.base_channels
                                                         : config_.base_channels + 1,
                              config_.fused_dim(), rng);
  gran_embed_ = GranularityEncoder(params_, "gran_embed", config_.fused_dim(), rng);

  mask_.trainable = {};
  for (const auto& g : params_.groups()) mask_.trainable.insert(g);
}

Var Denoiser::fused_embedding(int timestep, const Granularity& granularity) const {
  switch (config_.strategy) {
    case GranularityStrategy::kEncoding:
      return fuse(time_embed_(timestep), gran_embed_(granularity));
    case GranularityStrategy::kTimeStep:
      return time_embed_(granularity ? timestep_for_granularity(*granularity) : timestep);
    case GranularityStrategy::kTextPrompt:
      return time_embed_(timestep);
  }
  return time_embed_(timestep);
}

Var Denoiser::forward(const Var& latent_image, int timestep, const TextEmbedding& text,
                      const Granularity& granularity) const {
  const auto& shape = latent_image.shape();
  require(shape.size() == 3 && shape[0] == config_.in_channels,
          "denoiser input must be [4, h, w], got " + shape_string(shape));
  const int factor = 1 << (config_.stages() - 1);
  require(shape[1] % factor == 0 && shape[2] % factor == 0,
          "latent " + std::to_string(shape[1]) + "x" + std::to_string(shape[2]) +
              " is not divisible by " + std::to_string(factor));
  require(text.data.rank() == 2 && text.data.dim(0) == config_.text_tokens &&
              text.data.dim(1) == config_.text_width,
          "text embedding shape " + shape_string(text.data.shape()) + " does not match config");
  forward_passes_.fetch_add(1);

  Var text_var;
  if (config_.strategy == GranularityStrategy::kTextPrompt && granularity) {
    text_var = Var::constant(embed_caption(granularity_prompt(text.caption, *granularity),
                                           config_.text_tokens, config_.text_width)
                                 .data);
  } else {
    text_var = Var::constant(text.data);
  }
  const Var emb_act = silu(fused_embedding(timestep, granularity));

  Var h = conv_in_(latent_image);
  std::vector<Var> skips;
  for (const Stage& st : encoder_) {
    h = st.res(h, emb_act);
    if (st.has_attn) h = st.attn(h, text_var);
    skips.push_back(h);
    if (st.has_resample) h = st.resample(h);
  }
  for (const Stage& st : decoder_) {
    h = st.res(concat_channels(h, skips.back()), emb_act);
    skips.pop_back();
    if (st.has_attn) h = st.attn(h, text_var);
    if (st.has_resample) h = st.resample(upsample_nearest2x(h));
  }
  return conv_out_(silu(h));
}

LatentMap Denoiser::predict_latent(const LatentMap& latent_image, int timestep,
                                   const TextEmbedding& text,
                                   const Granularity& granularity) const {
  require(latent_image.all_finite(), "latent image has non-finite values");
  NoGradGuard no_grad;
  Var out = forward(Var::constant(to_chw(latent_image)), timestep, text, granularity);
  LatentMap result =
      from_chw(out.value(), latent_image.source_height, latent_image.source_width);
  if (!result.all_finite()) throw NumericError("denoiser produced non-finite output");
  return result;
}

void Denoiser::apply_mask(const FinetuneMask& mask) {
  for (const auto& g : params_.groups())
    require(mask.trainable.count(g) + mask.frozen.count(g) == 1,
            "finetune mask must list group '" + g + "' exactly once");
  for (auto& p : params_.all()) {
    p.var.set_requires_grad(mask.is_trainable(p.group));
    p.var.zero_grad();
  }
  mask_ = mask;
}

FinetuneMask build_finetune_mask(const Denoiser& model, FinetuneMode mode,
                                 const std::vector<std::string>& groups) {
  const auto all = model.parameters().groups();
  FinetuneMask mask;
  if (mode == FinetuneMode::kFull) {
    mask.trainable.insert(all.begin(), all.end());
    return mask;
  }
  const auto chosen = groups.empty() ? default_partial_groups(model.config()) : groups;
  for (const auto& g : chosen) {
    require(std::find(all.begin(), all.end(), g) != all.end(),
            "unknown parameter group '" + g + "'");
    mask.trainable.insert(g);
  }
  for (const auto& g : all)
    if (!mask.trainable.count(g)) mask.frozen.insert(g);
  return mask;
}

std::string to_string(FinetuneMode mode) {
  return mode == FinetuneMode::kPartial ? "partial" : "full";
}

FinetuneMode finetune_mode_from_string(const std::string& name) {
  if (name == "partial") return FinetuneMode::kPartial;
  if (name == "full") return FinetuneMode::kFull;
  throw ValidationError("unknown finetune mode '" + name + "'");
}

}  // namespace ged
