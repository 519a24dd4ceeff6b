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

#include <map>
#include <string>
#include <vector>

#include "ged/autograd.hpp"
#include "ged/rng.hpp"

namespace ged {

/// A named trainable array. `group` is the finetuning unit it belongs to.
struct Parameter {
  std::string name;
  std::string group;
  Var var;
};

/// Ordered registry of every parameter of a model.
class ParameterSet {
 public:
  Var add(const std::string& name, const std::string& group, Tensor init);

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  /// Group names in first-registration order.
  std::vector<std::string> groups() const;
  size_t count(const std::string& group) const;
  size_t total_size() const;

  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::map<std::string, size_t> index_;
};

/// Fully connected layer on vectors or row batches.
struct Linear {
  Var weight;  // [out, in]
  Var bias;    // [out]

  static Linear create(ParameterSet& ps, const std::string& name, const std::string& group,
                       int in, int out, Rng& rng, double gain = 1.0);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  Var rows(const Var& x) const { return linear_rows(x, weight, bias); }
};

struct Conv2d {
  Var weight;  // [out, in, k, k]
  Var bias;
  int stride = 1;
  int pad = 1;

  static Conv2d create(ParameterSet& ps, const std::string& name, const std::string& group,
                       int in, int out, int kernel, int stride, Rng& rng, double gain = 1.0);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
};

/// He-normal initialization, std = gain * sqrt(2 / fan_in).
Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng, double gain = 1.0);

}  // namespace ged
