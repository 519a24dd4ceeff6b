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

#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "ged/autograd.hpp"
#include "ged/image.hpp"
#include "ged/rng.hpp"

namespace ged::testing {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline BinaryMap random_binary(int h, int w, double density, Rng& rng) {
  BinaryMap m(h, w);
  for (auto& v : m.px) v = rng.coin(density);
  return m;
}

/// Largest relative error between the analytic gradient of f at `leaf` and
/// central differences with step `h`.
inline double gradient_error(Var leaf, const std::function<Var()>& f, double h = 1e-6) {
  leaf.zero_grad();
  f().backward();
  const Tensor analytic = leaf.grad();
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    double& x = leaf.mutable_value()[i];
    const double x0 = x;
    x = x0 + h;
    const double up = f().item();
    x = x0 - h;
    const double down = f().item();
    x = x0;
    const double numeric = (up - down) / (2 * h);
    const double err = std::abs(numeric - analytic[i]) /
                       std::max(1e-6, std::abs(numeric) + std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ged_" + tag + "_" + std::to_string(std::hash<std::string>{}(tag + std::to_string(
                                                     reinterpret_cast<uintptr_t>(this)))));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ged::testing
