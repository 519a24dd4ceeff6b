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

#include <atomic>
#include <cstdint>
#include <random>

namespace ged {

/// Caller-owned random source. Distributions are implemented here rather than
/// with <random> adaptors so that streams are identical across standard
/// libraries. Every draw bumps a process-wide counter, which tests use to
/// show that a code path consumes no randomness.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() {
    total_draws_.fetch_add(1, std::memory_order_relaxed);
    return engine_();
  }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  int range(int lo, int hi_inclusive) {
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi_inclusive - lo + 1)));
  }
  double normal();
  bool coin(double p = 0.5) { return uniform() < p; }

  static uint64_t total_draws() { return total_draws_.load(std::memory_order_relaxed); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  static inline std::atomic<uint64_t> total_draws_{0};
};

/// 64-bit FNV-1a, stable across platforms.
uint64_t stable_hash(const void* data, size_t len, uint64_t basis = 14695981039346656037ull);

}  // namespace ged
