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

#include "ged/parameters.hpp"

#include <algorithm>
#include <cmath>

#include "ged/error.hpp"

namespace ged {

Var ParameterSet::add(const std::string& name, const std::string& group, Tensor init) {
  require(!contains(name), "duplicate parameter name '" + name + "'");
  index_[name] = params_.size();
  params_.push_back({name, group, Var::leaf(std::move(init), true)});
  return params_.back().var;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter '" + name + "'");
  return params_[it->second];
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter '" + name + "'");
  return params_[it->second];
}

std::vector<std::string> ParameterSet::groups() const {
  std::vector<std::string> out;
  for (const auto& p : params_)
    if (std::find(out.begin(), out.end(), p.group) == out.end()) out.push_back(p.group);
  return out;
}

size_t ParameterSet::count(const std::string& group) const {
  size_t n = 0;
  for (const auto& p : params_)
    if (p.group == group) n += p.var.value().size();
  return n;
}

size_t ParameterSet::total_size() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng, double gain) {
  Tensor t(std::move(shape));
  const double std = gain * std::sqrt(2.0 / fan_in);
  for (double& v : t.values()) v = std * rng.normal();
  return t;
}

Linear Linear::create(ParameterSet& ps, const std::string& name, const std::string& group,
                      int in, int out, Rng& rng, double gain) {
  Linear l;
  l.weight = ps.add(name + ".weight", group, he_normal({out, in}, in, rng, gain));
  l.bias = ps.add(name + ".bias", group, Tensor({out}));
  return l;
}

Conv2d Conv2d::create(ParameterSet& ps, const std::string& name, const std::string& group,
                      int in, int out, int kernel, int stride, Rng& rng, double gain) {
  Conv2d c;
  c.weight =
      ps.add(name + ".weight", group, he_normal({out, in, kernel, kernel}, in * kernel * kernel, rng, gain));
  c.bias = ps.add(name + ".bias", group, Tensor({out}));
  c.stride = stride;
  c.pad = kernel / 2;
  return c;
}

}  // namespace ged
