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

#include "ged/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ged {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'D', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

nlohmann::json to_json(const CodecConstants& k, const CodecConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"channels", c.channels},
          {"downsample", c.downsample},
          {"luma_weights", k.luma_weights},
          {"channel_scale", k.channel_scale},
          {"edge_gain", k.edge_gain},
          {"edge_pivot", k.edge_pivot}};
}

LatentCodec codec_from_json(const nlohmann::json& j) {
  CodecConfig c;
  c.kind = codec_kind_from_string(j.at("kind").get<std::string>());
  c.channels = j.at("channels").get<int>();
  c.downsample = j.at("downsample").get<int>();
  CodecConstants k;
  k.luma_weights = j.at("luma_weights").get<std::array<double, 3>>();
  k.channel_scale = j.at("channel_scale").get<std::array<double, 4>>();
  k.edge_gain = j.at("edge_gain").get<double>();
  k.edge_pivot = j.at("edge_pivot").get<double>();
  return LatentCodec(c, k);
}

}  // namespace

nlohmann::json to_json(const UNetConfig& c) {
  return {{"base_channels", c.base_channels},
          {"stage_multipliers", c.stage_multipliers},
          {"attention_stages", c.attention_stages},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"text_tokens", c.text_tokens},
          {"text_width", c.text_width},
          {"embed_dim", c.embed_dim},
          {"strategy", to_string(c.strategy)},
          {"init_seed", c.init_seed}};
}

UNetConfig unet_config_from_json(const nlohmann::json& j) {
  UNetConfig c;
  c.base_channels = j.at("base_channels").get<int>();
  c.stage_multipliers = j.at("stage_multipliers").get<std::vector<int>>();
  c.attention_stages = j.at("attention_stages").get<std::vector<int>>();
  c.in_channels = j.at("in_channels").get<int>();
  c.out_channels = j.at("out_channels").get<int>();
  c.text_tokens = j.at("text_tokens").get<int>();
  c.text_width = j.at("text_width").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.strategy = granularity_strategy_from_string(j.at("strategy").get<std::string>());
  c.init_seed = j.at("init_seed").get<uint64_t>();
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Denoiser& model,
                     const LatentCodec& codec, const nlohmann::json& metadata) {
  nlohmann::json header;
  header["unet"] = to_json(model.config());
  header["codec"] = to_json(codec.constants(), codec.config());
  header["mask"] = {{"trainable", model.mask().trainable}, {"frozen", model.mask().frozen}};
  header["metadata"] = metadata.is_null() ? nlohmann::json::object() : metadata;
  auto& arrays = header["arrays"] = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& p : model.parameters().all()) {
    arrays.push_back({{"name", p.name},
                      {"group", p.group},
                      {"shape", p.var.value().shape()},
                      {"offset", offset}});
    offset += p.var.value().size();
  }
  const std::string text = header.dump();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    const uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    std::vector<float> buf;
    for (const auto& p : model.parameters().all()) {
      const auto v = p.var.value().values();
      buf.assign(v.begin(), v.end());
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw IoError("short write on checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  require(in && std::memcmp(magic, kMagic, sizeof magic) == 0,
          path.string() + " is not a checkpoint");
  require(len < (1ull << 30), "checkpoint header is implausibly large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  require(static_cast<bool>(in), "truncated checkpoint header");

  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ck.model = std::make_unique<Denoiser>(unet_config_from_json(header.at("unet")));
    ck.codec = codec_from_json(header.at("codec"));
    ck.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint header: " + std::string(e.what()));
  }

  auto& params = ck.model->parameters();
  const auto& arrays = header.at("arrays");
  require(arrays.size() == params.all().size(),
          "checkpoint holds " + std::to_string(arrays.size()) + " arrays, model expects " +
              std::to_string(params.all().size()));
  std::vector<float> buf;
  for (const auto& a : arrays) {
    const auto name = a.at("name").get<std::string>();
    require(params.contains(name), "checkpoint array '" + name + "' is not a model parameter");
    Tensor& w = params.at(name).var.mutable_value();
    require(a.at("shape").get<std::vector<int>>() == w.shape(),
            "shape mismatch for '" + name + "'");
    buf.resize(w.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    require(static_cast<bool>(in), "truncated checkpoint data at '" + name + "'");
    for (size_t i = 0; i < w.size(); ++i) w[i] = buf[i];
  }

  FinetuneMask mask;
  mask.trainable = header.at("mask").at("trainable").get<std::set<std::string>>();
  mask.frozen = header.at("mask").at("frozen").get<std::set<std::string>>();
  ck.model->apply_mask(mask);
  return ck;
}

}  // namespace ged
