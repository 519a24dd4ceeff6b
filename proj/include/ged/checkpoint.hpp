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

// Single-file model archive: an 8-byte magic, a little-endian u64 header
// length, a JSON header (configs, codec constants, mask, array index), then
// every parameter as float32 little-endian.

#pragma once

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "ged/denoiser.hpp"
#include "ged/latent_codec.hpp"

namespace ged {

struct Checkpoint {
  std::unique_ptr<Denoiser> model;
  LatentCodec codec;
  nlohmann::json metadata;  // free-form (step, granularity bounds, ...)
};

nlohmann::json to_json(const UNetConfig& config);
UNetConfig unet_config_from_json(const nlohmann::json& j);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Denoiser& model,
                     const LatentCodec& codec, const nlohmann::json& metadata = {});
/// Rebuilds the model from the stored config and loads every array.
/// Throws ValidationError on a malformed or mismatched archive.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ged
