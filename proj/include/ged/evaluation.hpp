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

// Boundary benchmark: thinning, tolerance matching against every annotator,
// precision/recall sweeps and the ODS / OIS / AP summaries.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ged/image.hpp"

namespace ged {

struct MatchConfig {
  double max_dist_frac = 0.0075;  // of the image diagonal
  int n_thresholds = 99;
  bool apply_nms = true;

  void validate() const;
  /// k / (n + 1) for k = 1..n.
  std::vector<double> thresholds() const;
  double max_dist_px(int height, int width) const;
};

/// Triangle-filter smoothing with radius r (separable, reflected borders).
ProbMap conv_tri(const ProbMap& map, int r);
/// Zhang-Suen thinning of a binary map (outside pixels count as 0).
BinaryMap thin_binary(const BinaryMap& map);
/// Suppresses pixels lower than either bilinear neighbour along the edge
/// normal, then thins the remaining support. Surviving values are unchanged.
ProbMap nms_thin(const ProbMap& map);

struct MatchResult {
  BinaryMap pred_matched;
  BinaryMap gt_matched;
  int64_t matched = 0;
};

/// Greedy one-to-one matching by increasing distance; ties broken by the
/// row-major index of the predicted pixel, then of the GT pixel.
MatchResult correspond_pixels_ref(const BinaryMap& pred, const BinaryMap& gt,
                                  double max_dist_px);

struct SweepCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn_total = 0;
  int64_t pred_count = 0;
  bool operator==(const SweepCounts&) const = default;
};

BinaryMap binarize(const ProbMap& map, double threshold);
/// Counts of one binary prediction against every annotator map.
SweepCounts count_against(const BinaryMap& pred, const std::vector<BinaryMap>& gts,
                          double max_dist_px);

/// Produces per-threshold counts for one (already thinned if required) map.
class MatchBackend {
 public:
  virtual ~MatchBackend() = default;
  virtual std::string name() const = 0;
  virtual std::vector<SweepCounts> sweep(const ProbMap& map, const std::vector<BinaryMap>& gts,
                                         const std::vector<double>& thresholds,
                                         double max_dist_px) const = 0;
};

class ReferenceBackend : public MatchBackend {
 public:
  std::string name() const override { return "ref"; }
  std::vector<SweepCounts> sweep(const ProbMap& map, const std::vector<BinaryMap>& gts,
                                 const std::vector<double>& thresholds,
                                 double max_dist_px) const override;
};

/// Loads an external kernel through its C interface. Throws IoError when the
/// library or a symbol is missing, ValidationError on an ABI mismatch.
class KernelBackend : public MatchBackend {
 public:
  explicit KernelBackend(const std::filesystem::path& library);
  ~KernelBackend() override;
  KernelBackend(const KernelBackend&) = delete;
  KernelBackend& operator=(const KernelBackend&) = delete;

  std::string name() const override { return "fast"; }
  std::vector<SweepCounts> sweep(const ProbMap& map, const std::vector<BinaryMap>& gts,
                                 const std::vector<double>& thresholds,
                                 double max_dist_px) const override;
  MatchResult correspond(const BinaryMap& pred, const BinaryMap& gt, double max_dist_px) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Library named by GED_MATCHKERNEL_LIB; IoError when unset.
std::unique_ptr<MatchBackend> make_backend(const std::string& kind);

struct PRPoint {
  double threshold = 0.0;
  int64_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f_measure = 0.0;
};

/// P = tp / (tp + fp), or 1 when nothing is predicted; R = tp / (tp + fn),
/// or 0 when there is nothing to find; F = 2PR / (P + R), or 0.
PRPoint make_point(double threshold, int64_t tp, int64_t fp, int64_t fn);

struct ImageBest {
  std::string id;
  int prediction = 0;  // index of the chosen prediction (always 0 for evaluate)
  PRPoint best;
};

struct EvalResult {
  double ods = 0.0;
  double ods_threshold = 0.0;
  /// Best dataset F over every per-image choice of (prediction, threshold).
  /// The shared-threshold choice is one candidate, so ois >= ods.
  double ois = 0.0;
  /// Dataset F of the counts each image reaches at its own best F; this can
  /// fall slightly below ods.
  double ois_independent = 0.0;
  double ap = 0.0;
  std::vector<ImageBest> per_image;
  std::vector<PRPoint> curve;
};

/// Area under the recall-sorted curve after making precision nonincreasing
/// in recall, by the trapezoid rule over the observed recall range.
double average_precision(const std::vector<PRPoint>& curve);

struct GroundTruth {
  std::string id;
  std::vector<BinaryMap> annotations;
};

struct PredictionSet {
  std::string id;
  std::vector<ProbMap> maps;  // M predictions of one image
};

EvalResult evaluate(const std::vector<PredictionSet>& predictions,
                    const std::vector<GroundTruth>& gts, const MatchConfig& config,
                    const MatchBackend& backend = ReferenceBackend());

/// Best-ODS picks, at every shared threshold, the prediction per image that
/// maximizes the dataset F; best-OIS picks a (prediction, threshold) per
/// image the same way.
EvalResult evaluate_multi(const std::vector<PredictionSet>& predictions,
                          const std::vector<GroundTruth>& gts, const MatchConfig& config,
                          const MatchBackend& backend = ReferenceBackend());

/// counts[i][m][t] for image i, prediction m, threshold t.
using CountTable = std::vector<std::vector<std::vector<SweepCounts>>>;

CountTable count_table(const std::vector<PredictionSet>& predictions,
                       const std::vector<GroundTruth>& gts, const MatchConfig& config,
                       const MatchBackend& backend);
EvalResult summarize(const CountTable& counts, const std::vector<std::string>& ids,
                     const std::vector<double>& thresholds);

/// One row per threshold plus a summary row; `header` lines are written as
/// leading comments.
void write_results_csv(const std::filesystem::path& path, const EvalResult& result,
                       const std::vector<std::string>& header);

}  // namespace ged
