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

#include "ged/evaluation.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

#include "ged/matchkernel_abi.h"
#include "ged/parallel.hpp"

namespace ged {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

// Central differences inside, one-sided at the borders.
void gradient(const ProbMap& m, ProbMap& gx, ProbMap& gy) {
  const int h = m.height, w = m.width;
  gx = ProbMap(h, w);
  gy = ProbMap(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (w > 1) {
        const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, w - 1);
        gx.at(y, x) = (m.at(y, x1) - m.at(y, x0)) / (x1 - x0);
      }
      if (h > 1) {
        const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, h - 1);
        gy.at(y, x) = (m.at(y1, x) - m.at(y0, x)) / (y1 - y0);
      }
    }
}

double interp(const ProbMap& m, double x, double y) {
  x = std::clamp(x, 0.0, m.width - 1.001);
  y = std::clamp(y, 0.0, m.height - 1.001);
  if (m.width == 1) x = 0.0;
  if (m.height == 1) y = 0.0;
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, m.width - 1), y1 = std::min(y0 + 1, m.height - 1);
  const double dx = x - x0, dy = y - y0;
  return (1 - dy) * ((1 - dx) * m.at(y0, x0) + dx * m.at(y0, x1)) +
         dy * ((1 - dx) * m.at(y1, x0) + dx * m.at(y1, x1));
}

int64_t popcount(const BinaryMap& m) {
  int64_t n = 0;
  for (uint8_t v : m.px) n += v != 0;
  return n;
}

}  // namespace

void MatchConfig::validate() const {
  require(max_dist_frac > 0.0 && max_dist_frac < 0.1, "max_dist_frac must lie in (0, 0.1)");
  require(n_thresholds >= 1, "n_thresholds must be >= 1");
}

std::vector<double> MatchConfig::thresholds() const {
  validate();
  std::vector<double> t(static_cast<size_t>(n_thresholds));
  for (int k = 0; k < n_thresholds; ++k) t[k] = static_cast<double>(k + 1) / (n_thresholds + 1);
  return t;
}

double MatchConfig::max_dist_px(int height, int width) const {
  return max_dist_frac * std::hypot(static_cast<double>(height), static_cast<double>(width));
}

ProbMap conv_tri(const ProbMap& map, int r) {
  require(r >= 0, "triangle radius must be >= 0");
  if (r == 0 || map.size() == 0) return map;
  std::vector<double> k(2 * r + 1);
  for (int i = -r; i <= r; ++i) k[i + r] = (r + 1 - std::abs(i)) / double((r + 1) * (r + 1));
  const int h = map.height, w = map.width;
  ProbMap tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * map.at(y, reflect(x + i, w));
      tmp.at(y, x) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(reflect(y + i, h), x);
      out.at(y, x) = s;
    }
  return out;
}

BinaryMap thin_binary(const BinaryMap& map) {
  BinaryMap m = map;
  for (auto& v : m.px) v = v != 0;
  const int h = m.height, w = m.width;
  auto px = [&](int y, int x) -> int {
    return y >= 0 && y < h && x >= 0 && x < w ? m.at(y, x) : 0;
  };
  std::vector<size_t> remove;
  for (bool changed = true; changed;) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      remove.clear();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!m.at(y, x)) continue;
          // P2..P9 clockwise from north.
          const int p[8] = {px(y - 1, x),     px(y - 1, x + 1), px(y, x + 1), px(y + 1, x + 1),
                            px(y + 1, x),     px(y + 1, x - 1), px(y, x - 1), px(y - 1, x - 1)};
          int b = 0, a = 0;
          for (int i = 0; i < 8; ++i) {
            b += p[i];
            a += p[i] == 0 && p[(i + 1) % 8] == 1;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const bool c = pass == 0 ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                   : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
          if (c) remove.push_back(static_cast<size_t>(y) * w + x);
        }
      for (size_t i : remove) m.px[i] = 0;
      changed = changed || !remove.empty();
    }
  }
  return m;
}

ProbMap nms_thin(const ProbMap& map) {
  const int h = map.height, w = map.width;
  if (map.size() == 0) return map;
  ProbMap ox, oy, oxx, oxy, oyx, oyy;
  gradient(conv_tri(map, 4), ox, oy);
  gradient(ox, oxx, oxy);
  gradient(oy, oyx, oyy);

  ProbMap kept = map;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double e = map.at(y, x);
      if (e <= 0.0) continue;
      // Normal = eigenvector of the most negative Hessian eigenvalue.
      const double theta =
          0.5 * std::atan2(oxy.at(y, x) + oyx.at(y, x), oxx.at(y, x) - oyy.at(y, x)) +
          std::numbers::pi / 2;
      const double c = std::cos(theta), s = std::sin(theta);
      for (int d : {-1, 1})
        if (e < interp(map, x + d * c, y + d * s)) {
          kept.at(y, x) = 0.0;
          break;
        }
    }

  BinaryMap support(h, w);
  for (size_t i = 0; i < kept.size(); ++i) support.px[i] = kept.px[i] > 0.0;
  const BinaryMap thin = thin_binary(support);
  for (size_t i = 0; i < kept.size(); ++i)
    if (!thin.px[i]) kept.px[i] = 0.0;
  return kept;
}

MatchResult correspond_pixels_ref(const BinaryMap& pred, const BinaryMap& gt,
                                  double max_dist_px) {
  require(pred.same_shape(gt), "prediction and ground truth shapes differ");
  require(max_dist_px >= 0.0 && std::isfinite(max_dist_px), "match tolerance must be >= 0");
  const int h = pred.height, w = pred.width;
  const int reach = static_cast<int>(std::floor(max_dist_px));
  const double limit = max_dist_px * max_dist_px;

  std::vector<std::tuple<int64_t, int64_t, int64_t>> pairs;  // (dist^2, pred, gt)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!pred.at(y, x)) continue;
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx) {
          const int gy = y + dy, gx = x + dx;
          if (gy < 0 || gy >= h || gx < 0 || gx >= w || !gt.at(gy, gx)) continue;
          const int64_t d2 = int64_t{dy} * dy + int64_t{dx} * dx;
          if (static_cast<double>(d2) > limit) continue;
          pairs.emplace_back(d2, int64_t{y} * w + x, int64_t{gy} * w + gx);
        }
    }
  std::sort(pairs.begin(), pairs.end());

  MatchResult r{BinaryMap(h, w), BinaryMap(h, w), 0};
  for (const auto& [d2, p, g] : pairs) {
    if (r.pred_matched.px[p] || r.gt_matched.px[g]) continue;
    r.pred_matched.px[p] = 1;
    r.gt_matched.px[g] = 1;
    ++r.matched;
  }
  return r;
}

BinaryMap binarize(const ProbMap& map, double threshold) {
  BinaryMap out(map.height, map.width);
  for (size_t i = 0; i < map.size(); ++i) out.px[i] = map.px[i] >= threshold;
  return out;
}

SweepCounts count_against(const BinaryMap& pred, const std::vector<BinaryMap>& gts,
                          double max_dist_px) {
  require(!gts.empty(), "at least one ground-truth map is required");
  SweepCounts c;
  c.pred_count = popcount(pred);
  BinaryMap hit(pred.height, pred.width);
  for (const auto& gt : gts) {
    const MatchResult m = correspond_pixels_ref(pred, gt, max_dist_px);
    for (size_t i = 0; i < hit.size(); ++i) hit.px[i] |= m.pred_matched.px[i];
    c.fn_total += popcount(gt) - m.matched;
  }
  c.tp = popcount(hit);
  c.fp = c.pred_count - c.tp;
  return c;
}

std::vector<SweepCounts> ReferenceBackend::sweep(const ProbMap& map,
                                                 const std::vector<BinaryMap>& gts,
                                                 const std::vector<double>& thresholds,
                                                 double max_dist_px) const {
  for (size_t i = 1; i < thresholds.size(); ++i)
    require(thresholds[i] > thresholds[i - 1], "thresholds must be strictly increasing");
  std::vector<SweepCounts> out;
  for (double t : thresholds) {
    const BinaryMap pred = binarize(map, t);
    // Binarized sets are nested in t, so an equal count means an equal set.
    if (!out.empty() && popcount(pred) == out.back().pred_count) {
      out.push_back(out.back());
      continue;
    }
    out.push_back(count_against(pred, gts, max_dist_px));
  }
  return out;
}

struct KernelBackend::Impl {
  void* handle = nullptr;
  ged_mk_v1_correspond_fn correspond = nullptr;
  ged_mk_v1_sweep_fn sweep = nullptr;
};

KernelBackend::KernelBackend(const std::filesystem::path& library) : impl_(new Impl) {
  impl_->handle = dlopen(library.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!impl_->handle) throw IoError("cannot load match kernel: " + std::string(dlerror()));
  auto sym = [&](const char* name) {
    void* p = dlsym(impl_->handle, name);
    if (!p) {
      dlclose(impl_->handle);
      impl_->handle = nullptr;
      throw IoError(std::string("match kernel lacks symbol ") + name);
    }
    return p;
  };
  auto version = reinterpret_cast<ged_mk_abi_version_fn>(sym("ged_mk_abi_version"));
  const uint32_t v = version();
  if (v != GED_MK_ABI_VERSION) {
    dlclose(impl_->handle);
    impl_->handle = nullptr;
    throw ValidationError("match kernel ABI version " + std::to_string(v) + ", expected " +
                          std::to_string(GED_MK_ABI_VERSION));
  }
  impl_->correspond = reinterpret_cast<ged_mk_v1_correspond_fn>(sym("ged_mk_v1_correspond"));
  impl_->sweep = reinterpret_cast<ged_mk_v1_sweep_fn>(sym("ged_mk_v1_sweep"));
}

KernelBackend::~KernelBackend() {
  if (impl_ && impl_->handle) dlclose(impl_->handle);
}

namespace {

void check_status(int32_t status) {
  switch (status) {
    case GED_MK_OK: return;
    case GED_MK_ERR_LENGTH: throw ValidationError("match kernel: array length mismatch");
    case GED_MK_ERR_ARGUMENT: throw ValidationError("match kernel: invalid argument");
    default: throw NumericError("match kernel failed with status " + std::to_string(status));
  }
}

}  // namespace

std::vector<SweepCounts> KernelBackend::sweep(const ProbMap& map,
                                              const std::vector<BinaryMap>& gts,
                                              const std::vector<double>& thresholds,
                                              double max_dist_px) const {
  std::vector<const uint8_t*> ptrs;
  for (const auto& g : gts) {
    require(g.same_shape(map), "prediction and ground truth shapes differ");
    ptrs.push_back(g.px.data());
  }
  std::vector<ged_mk_counts> raw(thresholds.size());
  check_status(impl_->sweep(map.px.data(), map.size(), ptrs.data(), ptrs.size(), map.height,
                            map.width, thresholds.data(), thresholds.size(), max_dist_px, 0,
                            raw.data()));
  std::vector<SweepCounts> out;
  for (const auto& r : raw) {
    check_status(r.status);
    out.push_back({r.tp, r.fp, r.fn_total, r.pred_count});
  }
  return out;
}

MatchResult KernelBackend::correspond(const BinaryMap& pred, const BinaryMap& gt,
                                      double max_dist_px) const {
  require(pred.same_shape(gt), "prediction and ground truth shapes differ");
  MatchResult r{BinaryMap(pred.height, pred.width), BinaryMap(gt.height, gt.width), 0};
  const ged_mk_counts c =
      impl_->correspond(pred.px.data(), pred.size(), gt.px.data(), gt.size(), pred.height,
                        pred.width, max_dist_px, r.pred_matched.px.data(), r.gt_matched.px.data());
  check_status(c.status);
  r.matched = c.tp;
  return r;
}

std::unique_ptr<MatchBackend> make_backend(const std::string& kind) {
  if (kind == "ref") return std::make_unique<ReferenceBackend>();
  if (kind == "fast") {
    const char* lib = std::getenv("GED_MATCHKERNEL_LIB");
    if (!lib || !*lib) throw IoError("the fast kernel needs GED_MATCHKERNEL_LIB to be set");
    return std::make_unique<KernelBackend>(lib);
  }
  throw ValidationError("unknown kernel '" + kind + "' (expected ref or fast)");
}

PRPoint make_point(double threshold, int64_t tp, int64_t fp, int64_t fn) {
  PRPoint p{threshold, tp, fp, fn, 1.0, 0.0, 0.0};
  if (tp + fp > 0) p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) p.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (p.precision + p.recall > 0.0)
    p.f_measure = 2.0 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

double average_precision(const std::vector<PRPoint>& curve) {
  if (curve.empty()) return 0.0;
  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  for (const auto& p : curve) pts.emplace_back(p.recall, p.precision);
  std::sort(pts.begin(), pts.end());
  for (size_t i = pts.size() - 1; i-- > 0;)
    pts[i].second = std::max(pts[i].second, pts[i + 1].second);
  double area = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i)
    area += (pts[i + 1].first - pts[i].first) * (pts[i].second + pts[i + 1].second) / 2.0;
  return area;
}

CountTable count_table(const std::vector<PredictionSet>& predictions,
                       const std::vector<GroundTruth>& gts, const MatchConfig& config,
                       const MatchBackend& backend) {
  config.validate();
  std::map<std::string, const PredictionSet*> by_id;
  for (const auto& p : predictions) by_id[p.id] = &p;
  std::string missing;
  for (const auto& g : gts)
    if (!by_id.count(g.id)) missing += (missing.empty() ? "" : ", ") + g.id;
  require(missing.empty(), "missing predictions for: " + missing);
  require(!gts.empty(), "nothing to evaluate");

  const size_t m = by_id.at(gts.front().id)->maps.size();
  require(m >= 1, "each image needs at least one prediction");
  for (const auto& g : gts) {
    const auto& set = *by_id.at(g.id);
    require(set.maps.size() == m, "ragged prediction counts: image '" + g.id + "' has " +
                                      std::to_string(set.maps.size()) + ", expected " +
                                      std::to_string(m));
    require(!g.annotations.empty(), "image '" + g.id + "' has no annotations");
    for (const auto& map : set.maps)
      for (const auto& a : g.annotations)
        require(map.same_shape(a), "prediction/annotation shape mismatch for '" + g.id + "'");
  }

  const auto thresholds = config.thresholds();
  CountTable table(gts.size(), std::vector<std::vector<SweepCounts>>(m));
  parallel_for(gts.size() * m, [&](size_t job) {
    const size_t i = job / m, k = job % m;
    const GroundTruth& g = gts[i];
    const ProbMap& raw = by_id.at(g.id)->maps[k];
    const ProbMap map = config.apply_nms ? nms_thin(raw) : raw;
    table[i][k] = backend.sweep(map, g.annotations, thresholds,
                                config.max_dist_px(raw.height, raw.width));
  });
  return table;
}

namespace {

// Dataset F = 2 tp / (2 tp + fp + fn) is a ratio of sums, so picking one
// option per image to maximize it is solved exactly by Dinkelbach's
// iteration. Ties keep the earliest option.
template <typename OptionsOf>
std::vector<SweepCounts> best_selection(size_t n_images, size_t n_options, OptionsOf option) {
  std::vector<size_t> choice(n_images, 0);
  int64_t num = 0, den = 1;
  for (;;) {
    int64_t n2 = 0, d2 = 0;
    for (size_t i = 0; i < n_images; ++i) {
      int64_t best = 0;
      for (size_t k = 0; k < n_options; ++k) {
        const SweepCounts& c = option(i, k);
        const int64_t score = 2 * c.tp * den - num * (2 * c.tp + c.fp + c.fn_total);
        if (k == 0 || score > best) best = score, choice[i] = k;
      }
      const SweepCounts& c = option(i, choice[i]);
      n2 += 2 * c.tp;
      d2 += 2 * c.tp + c.fp + c.fn_total;
    }
    if (d2 == 0 || n2 * den <= num * d2) break;
    num = n2;
    den = d2;
  }
  std::vector<SweepCounts> out;
  for (size_t i = 0; i < n_images; ++i) out.push_back(option(i, choice[i]));
  return out;
}

PRPoint sum_point(double threshold, const std::vector<SweepCounts>& picks) {
  int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& c : picks) tp += c.tp, fp += c.fp, fn += c.fn_total;
  return make_point(threshold, tp, fp, fn);
}

// Best-F (prediction, threshold) per image on its own; first maximum wins.
std::vector<ImageBest> best_per_image(const CountTable& counts,
                                      const std::vector<std::string>& ids,
                                      const std::vector<double>& thresholds) {
  std::vector<ImageBest> out;
  for (size_t i = 0; i < counts.size(); ++i) {
    ImageBest b{ids[i], 0, make_point(thresholds[0], 0, 0, 0)};
    bool first = true;
    for (size_t m = 0; m < counts[i].size(); ++m)
      for (size_t t = 0; t < thresholds.size(); ++t) {
        const auto& c = counts[i][m][t];
        const PRPoint p = make_point(thresholds[t], c.tp, c.fp, c.fn_total);
        if (first || p.f_measure > b.best.f_measure) {
          b.prediction = static_cast<int>(m);
          b.best = p;
          first = false;
        }
      }
    out.push_back(b);
  }
  return out;
}

EvalResult finish(const CountTable& counts, std::vector<PRPoint> curve,
                  std::vector<ImageBest> per_image) {
  EvalResult r;
  r.curve = std::move(curve);
  r.per_image = std::move(per_image);
  for (const auto& p : r.curve)
    if (p.f_measure > r.ods) {
      r.ods = p.f_measure;
      r.ods_threshold = p.threshold;
    }
  const size_t nt = counts.front().front().size();
  r.ois = sum_point(0.0, best_selection(counts.size(), counts.front().size() * nt,
                                        [&](size_t i, size_t k) -> const SweepCounts& {
                                          return counts[i][k / nt][k % nt];
                                        }))
              .f_measure;
  int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& b : r.per_image) tp += b.best.tp, fp += b.best.fp, fn += b.best.fn;
  r.ois_independent = make_point(0.0, tp, fp, fn).f_measure;
  r.ap = average_precision(r.curve);
  return r;
}

}  // namespace

EvalResult evaluate(const std::vector<PredictionSet>& predictions,
                    const std::vector<GroundTruth>& gts, const MatchConfig& config,
                    const MatchBackend& backend) {
  const CountTable counts = count_table(predictions, gts, config, backend);
  require(counts.front().size() == 1, "evaluate takes one prediction per image");
  const auto thresholds = config.thresholds();
  std::vector<PRPoint> curve;
  for (size_t t = 0; t < thresholds.size(); ++t) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (const auto& img : counts) tp += img[0][t].tp, fp += img[0][t].fp, fn += img[0][t].fn_total;
    curve.push_back(make_point(thresholds[t], tp, fp, fn));
  }
  std::vector<std::string> ids;
  for (const auto& g : gts) ids.push_back(g.id);
  return finish(counts, std::move(curve), best_per_image(counts, ids, thresholds));
}

EvalResult summarize(const CountTable& counts, const std::vector<std::string>& ids,
                     const std::vector<double>& thresholds) {
  require(!counts.empty() && counts.size() == ids.size(), "count table and ids disagree");
  std::vector<PRPoint> curve;
  for (size_t t = 0; t < thresholds.size(); ++t)
    curve.push_back(sum_point(thresholds[t],
                              best_selection(counts.size(), counts.front().size(),
                                             [&](size_t i, size_t m) -> const SweepCounts& {
                                               return counts[i][m][t];
                                             })));
  return finish(counts, std::move(curve), best_per_image(counts, ids, thresholds));
}

EvalResult evaluate_multi(const std::vector<PredictionSet>& predictions,
                          const std::vector<GroundTruth>& gts, const MatchConfig& config,
                          const MatchBackend& backend) {
  const CountTable counts = count_table(predictions, gts, config, backend);
  std::vector<std::string> ids;
  for (const auto& g : gts) ids.push_back(g.id);
  return summarize(counts, ids, config.thresholds());
}

void write_results_csv(const std::filesystem::path& path, const EvalResult& result,
                       const std::vector<std::string>& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[160];
  for (const auto& h : header) out << "# " << h << "\n";
  out << "threshold,precision,recall,f_measure\n";
  for (const auto& p : result.curve) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10f,%.10f,%.10f\n", p.threshold, p.precision,
                  p.recall, p.f_measure);
    out << buf;
  }
  out << "ods,ois,ap,ods_threshold\n";
  std::snprintf(buf, sizeof buf, "%.10f,%.10f,%.10f,%.10g\n", result.ods, result.ois, result.ap,
                result.ods_threshold);
  out << buf;
}

}  // namespace ged
