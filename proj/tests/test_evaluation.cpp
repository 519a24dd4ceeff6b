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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eval_oracles.hpp"
#include "ged/evaluation.hpp"
#include "test_util.hpp"

namespace ged {
namespace {

using testing::random_binary;
using testing::TempDir;

std::vector<PredictionSet> single(const oracle::MicroBenchmark& mb) {
  std::vector<PredictionSet> p;
  for (size_t i = 0; i < mb.ids.size(); ++i) p.push_back({mb.ids[i], {mb.preds[i]}});
  return p;
}

std::vector<GroundTruth> truths(const oracle::MicroBenchmark& mb) {
  std::vector<GroundTruth> g;
  for (size_t i = 0; i < mb.ids.size(); ++i) g.push_back({mb.ids[i], mb.gts[i]});
  return g;
}

ProbMap random_prob(int h, int w, double density, Rng& rng) {
  ProbMap m(h, w);
  for (auto& v : m.px) v = rng.coin(density) ? rng.uniform() : 0.0;
  return m;
}

TEST(MatchConfig, ThresholdsAndRadius) {
  MatchConfig c;
  c.n_thresholds = 4;
  EXPECT_EQ(c.thresholds(), (std::vector<double>{0.2, 0.4, 0.6, 0.8}));
  EXPECT_DOUBLE_EQ(c.max_dist_px(30, 40), 0.0075 * 50);
  c.n_thresholds = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Correspond, IdenticalMapsMatchEverything) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMap m = random_binary(17, 13, 0.3, rng);
    const MatchResult r = correspond_pixels_ref(m, m, 0.0);
    EXPECT_EQ(r.matched, static_cast<int64_t>(count_edges(m)));
    EXPECT_EQ(r.pred_matched, m);
    EXPECT_EQ(r.gt_matched, m);
  }
}

TEST(Correspond, ToleranceBoundaryIsInclusive) {
  BinaryMap p(10, 10), g(10, 10);
  p.at(2, 2) = 1;
  g.at(5, 6) = 1;  // distance 5
  EXPECT_EQ(correspond_pixels_ref(p, g, 5.0).matched, 1);
  EXPECT_EQ(correspond_pixels_ref(p, g, 5.0 - 1e-9).matched, 0);
  EXPECT_EQ(correspond_pixels_ref(p, g, 4.0).matched, 0);
}

TEST(Correspond, GreedyTieBreakOrder) {
  // One predicted pixel equidistant from two GT pixels: the lower row-major
  // GT index wins.
  BinaryMap p(5, 5), g(5, 5);
  p.at(2, 2) = 1;
  g.at(2, 1) = 1;
  g.at(2, 3) = 1;
  const MatchResult r = correspond_pixels_ref(p, g, 1.0);
  EXPECT_EQ(r.matched, 1);
  EXPECT_EQ(r.gt_matched.at(2, 1), 1);
  EXPECT_EQ(r.gt_matched.at(2, 3), 0);
}

TEST(Correspond, AgreesWithGreedyOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = rng.range(2, 20), w = rng.range(2, 20);
    const double r = rng.uniform(0.0, 3.0);
    const BinaryMap p = random_binary(h, w, rng.uniform(0.02, 0.3), rng);
    const BinaryMap g = random_binary(h, w, rng.uniform(0.02, 0.3), rng);
    const MatchResult res = correspond_pixels_ref(p, g, r);
    int64_t oracle_n = 0;
    const auto pm = oracle::greedy_pred_matched(p, g, r, &oracle_n);
    ASSERT_EQ(res.matched, oracle_n) << "trial " << trial;
    const auto on = oracle::on_pixels(p);
    for (size_t i = 0; i < on.size(); ++i) EXPECT_EQ(res.pred_matched.at(on[i].y, on[i].x), pm[i]);
    EXPECT_EQ(static_cast<int64_t>(count_edges(res.gt_matched)), res.matched);
    EXPECT_LE(res.matched, oracle::max_matching(p, g, r));
  }
}

// Greedy versus maximum matching. At the benchmark tolerance on images up to
// 20 px the radius is below one pixel, so only coincident pixels match and
// greedy is exact. Sparse maps with a radius up to 1.5 px lose at most one
// match. Denser or wider settings can lose more; the histogram is printed.
TEST(Correspond, GreedyDeficitAgainstMaximumMatching) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int h = rng.range(2, 20), w = rng.range(2, 20);
    const BinaryMap p = random_binary(h, w, 0.3, rng), g = random_binary(h, w, 0.3, rng);
    const double r = MatchConfig{}.max_dist_px(h, w);
    ASSERT_EQ(correspond_pixels_ref(p, g, r).matched, oracle::max_matching(p, g, r));
  }
  for (int trial = 0; trial < 2000; ++trial) {
    const int h = rng.range(2, 20), w = rng.range(2, 20);
    const double r = rng.uniform(0.0, 1.5);
    const BinaryMap p = random_binary(h, w, 0.05, rng), g = random_binary(h, w, 0.05, rng);
    const int64_t deficit = oracle::max_matching(p, g, r) - correspond_pixels_ref(p, g, r).matched;
    ASSERT_GE(deficit, 0);
    ASSERT_LE(deficit, 1) << "trial " << trial;
  }
  int hist[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = rng.range(2, 20), w = rng.range(2, 20);
    const double r = rng.uniform(1.0, 3.0);
    const BinaryMap p = random_binary(h, w, 0.2, rng), g = random_binary(h, w, 0.2, rng);
    const int64_t deficit = oracle::max_matching(p, g, r) - correspond_pixels_ref(p, g, r).matched;
    ASSERT_GE(deficit, 0);
    ++hist[std::min<int64_t>(deficit, 3)];
  }
  std::cout << "dense greedy deficit histogram (0, 1, 2, 3+): " << hist[0] << " " << hist[1]
            << " " << hist[2] << " " << hist[3] << "\n";
}

TEST(CountAgainst, MatchesOracleAcrossAnnotators) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMap p = random_binary(15, 18, 0.2, rng);
    std::vector<BinaryMap> gts;
    for (int k = 0; k < 3; ++k) gts.push_back(random_binary(15, 18, 0.15, rng));
    const SweepCounts c = count_against(p, gts, 1.5);
    const oracle::Counts o = oracle::count_binary(p, gts, 1.5);
    EXPECT_EQ(c.tp, o.tp);
    EXPECT_EQ(c.fp, o.fp);
    EXPECT_EQ(c.fn_total, o.fn);
    EXPECT_EQ(c.pred_count, static_cast<int64_t>(count_edges(p)));
  }
}

TEST(PRPoint, Conventions) {
  const PRPoint none = make_point(0.5, 0, 0, 7);
  EXPECT_EQ(none.precision, 1.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f_measure, 0.0);
  const PRPoint nothing_to_find = make_point(0.5, 0, 3, 0);
  EXPECT_EQ(nothing_to_find.recall, 0.0);
  const PRPoint p = make_point(0.5, 3, 1, 2);
  EXPECT_DOUBLE_EQ(p.precision, 0.75);
  EXPECT_DOUBLE_EQ(p.recall, 0.6);
  EXPECT_DOUBLE_EQ(p.f_measure, 2 * 0.75 * 0.6 / 1.35);
}

TEST(AveragePrecision, HandComputed) {
  // Points (R, P): (0.2, 0.5), (0.5, 0.8), (0.9, 0.4). Envelope lifts the
  // first to 0.8: 0.3 * 0.8 + 0.4 * 0.6 = 0.48.
  std::vector<PRPoint> c = {make_point(0.1, 0, 0, 0), make_point(0.2, 0, 0, 0),
                            make_point(0.3, 0, 0, 0)};
  c[0].recall = 0.9, c[0].precision = 0.4;
  c[1].recall = 0.5, c[1].precision = 0.8;
  c[2].recall = 0.2, c[2].precision = 0.5;
  EXPECT_NEAR(average_precision(c), 0.48, 1e-12);
}

TEST(Evaluate, MicroBenchmarkMatchesBruteForce) {
  const auto mb = oracle::micro_benchmark();
  for (double frac : {0.0075, 0.03}) {
    for (int n : {9, 99}) {
      MatchConfig cfg;
      cfg.apply_nms = false;
      cfg.max_dist_frac = frac;
      cfg.n_thresholds = n;
      const EvalResult r = evaluate(single(mb), truths(mb), cfg);
      const oracle::Metrics o = oracle::evaluate(mb.preds, mb.gts, frac, n);
      EXPECT_NEAR(r.ods, o.ods, 1e-9) << frac << " " << n;
      EXPECT_NEAR(r.ois, o.ois, 1e-9) << frac << " " << n;
      EXPECT_NEAR(r.ois_independent, o.ois_independent, 1e-9) << frac << " " << n;
      EXPECT_NEAR(r.ap, o.ap, 1e-9) << frac << " " << n;
      ASSERT_EQ(r.curve.size(), o.f_curve.size());
      for (size_t t = 0; t < o.f_curve.size(); ++t)
        EXPECT_NEAR(r.curve[t].f_measure, o.f_curve[t], 1e-9);
      EXPECT_GT(r.ods, 0.3);
      EXPECT_LT(r.ods, 1.0);
    }
  }
}

TEST(Evaluate, MicroBenchmarkWithThinningMatchesBruteForce) {
  const auto mb = oracle::micro_benchmark();
  MatchConfig cfg;
  cfg.n_thresholds = 19;
  std::vector<ProbMap> thinned;
  for (const auto& p : mb.preds) thinned.push_back(nms_thin(p));
  const EvalResult r = evaluate(single(mb), truths(mb), cfg);
  const oracle::Metrics o = oracle::evaluate(thinned, mb.gts, cfg.max_dist_frac, 19);
  EXPECT_NEAR(r.ods, o.ods, 1e-9);
  EXPECT_NEAR(r.ois, o.ois, 1e-9);
  EXPECT_NEAR(r.ap, o.ap, 1e-9);
}

TEST(Evaluate, PerfectAndEmptyPredictions) {
  Rng rng(2);
  std::vector<GroundTruth> gts;
  std::vector<PredictionSet> perfect, empty;
  for (int i = 0; i < 4; ++i) {
    const BinaryMap g = random_binary(20, 24, 0.1, rng);
    ProbMap p(20, 24);
    for (size_t k = 0; k < g.size(); ++k) p.px[k] = g.px[k];
    const std::string id = "im" + std::to_string(i);
    gts.push_back({id, {g}});
    perfect.push_back({id, {p}});
    empty.push_back({id, {ProbMap(20, 24)}});
  }
  MatchConfig cfg;
  cfg.apply_nms = false;
  const EvalResult r = evaluate(perfect, gts, cfg);
  EXPECT_DOUBLE_EQ(r.ods, 1.0);
  EXPECT_DOUBLE_EQ(r.ois, 1.0);
  EXPECT_DOUBLE_EQ(r.ap, 0.0);  // every threshold sits at recall 1: no width to integrate
  const EvalResult e = evaluate(empty, gts, cfg);
  EXPECT_EQ(e.ods, 0.0);
  EXPECT_EQ(e.ois, 0.0);
  EXPECT_EQ(e.ap, 0.0);
}

TEST(Evaluate, OisNeverBelowOds) {
  int independent_below = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<GroundTruth> gts;
    std::vector<PredictionSet> preds;
    for (int i = 0; i < 3; ++i) {
      const std::string id = "s" + std::to_string(i);
      gts.push_back({id, {random_binary(12, 14, 0.15, rng), random_binary(12, 14, 0.1, rng)}});
      preds.push_back({id, {random_prob(12, 14, 0.3, rng)}});
    }
    MatchConfig cfg;
    cfg.n_thresholds = 15;
    cfg.max_dist_frac = 0.08;
    const EvalResult r = evaluate(preds, gts, cfg);
    EXPECT_GE(r.ois, r.ods - 1e-12) << "seed " << seed;
    EXPECT_GE(r.ois, r.ois_independent - 1e-12) << "seed " << seed;
    independent_below += r.ois_independent < r.ods - 1e-12;
  }
  // Summing each image's own best-F counts is not guaranteed to dominate.
  EXPECT_GT(independent_below, 0);
}

TEST(EvaluateMulti, SinglePredictionIsBitIdentical) {
  const auto mb = oracle::micro_benchmark();
  MatchConfig cfg;
  cfg.n_thresholds = 29;
  const EvalResult a = evaluate(single(mb), truths(mb), cfg);
  const EvalResult b = evaluate_multi(single(mb), truths(mb), cfg);
  EXPECT_EQ(a.ods, b.ods);
  EXPECT_EQ(a.ois, b.ois);
  EXPECT_EQ(a.ap, b.ap);
  EXPECT_EQ(a.ods_threshold, b.ods_threshold);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (size_t t = 0; t < a.curve.size(); ++t) {
    EXPECT_EQ(a.curve[t].tp, b.curve[t].tp);
    EXPECT_EQ(a.curve[t].fp, b.curve[t].fp);
    EXPECT_EQ(a.curve[t].fn, b.curve[t].fn);
    EXPECT_EQ(a.curve[t].f_measure, b.curve[t].f_measure);
  }
}

TEST(EvaluateMulti, MatchesExhaustiveSelection) {
  for (uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(100 + seed);
    const int n_img = 4, m = 3;
    std::vector<GroundTruth> gts;
    std::vector<PredictionSet> preds;
    for (int i = 0; i < n_img; ++i) {
      const std::string id = "x" + std::to_string(i);
      gts.push_back({id, {random_binary(10, 12, 0.2, rng)}});
      PredictionSet set{id, {}};
      for (int k = 0; k < m; ++k) set.maps.push_back(random_prob(10, 12, rng.uniform(0.05, 0.5), rng));
      preds.push_back(set);
    }
    MatchConfig cfg;
    cfg.n_thresholds = 9;
    cfg.max_dist_frac = 0.09;
    cfg.apply_nms = false;
    const EvalResult r = evaluate_multi(preds, gts, cfg);

    std::vector<std::vector<std::vector<oracle::Counts>>> counts(n_img);
    for (int i = 0; i < n_img; ++i)
      for (int k = 0; k < m; ++k) {
        std::vector<oracle::Counts> row;
        const double rad = oracle::radius(10, 12, cfg.max_dist_frac);
        for (double t : oracle::grid(cfg.n_thresholds))
          row.push_back(oracle::count_binary(oracle::threshold(preds[i].maps[k], t),
                                             gts[i].annotations, rad));
        counts[i].push_back(row);
      }
    const oracle::Metrics o = oracle::exhaustive_multi(counts);
    EXPECT_NEAR(r.ods, o.ods, 1e-9) << "seed " << seed;
    EXPECT_NEAR(r.ois, o.ois, 1e-9) << "seed " << seed;
    EXPECT_NEAR(r.ois_independent, o.ois_independent, 1e-9) << "seed " << seed;
    for (size_t t = 0; t < o.f_curve.size(); ++t)
      EXPECT_NEAR(r.curve[t].f_measure, o.f_curve[t], 1e-9) << "seed " << seed << " t " << t;
    // Choosing among predictions never lowers the score of any fixed choice.
    MatchConfig one = cfg;
    for (int k = 0; k < m; ++k) {
      std::vector<PredictionSet> fixed;
      for (const auto& p : preds) fixed.push_back({p.id, {p.maps[k]}});
      EXPECT_GE(r.ods + 1e-12, evaluate(fixed, gts, one).ods);
    }
  }
}

TEST(Nms, ThickRidgeThinsToOnePixel) {
  ProbMap ridge(24, 30);
  for (int y = 10; y <= 12; ++y)
    for (int x = 0; x < 30; ++x) ridge.at(y, x) = y == 11 ? 0.9 : 0.6;
  const ProbMap t = nms_thin(ridge);
  for (int x = 3; x < 27; ++x) {
    int on = 0;
    for (int y = 0; y < 24; ++y) on += t.at(y, x) > 0;
    EXPECT_EQ(on, 1) << "column " << x;
    EXPECT_EQ(t.at(11, x), 0.9);
  }

  // Flat-topped vertical ridge, three pixels wide.
  ProbMap flat(30, 24);
  for (int y = 0; y < 30; ++y)
    for (int x = 8; x <= 10; ++x) flat.at(y, x) = 0.7;
  const ProbMap f = nms_thin(flat);
  for (int y = 3; y < 27; ++y) {
    int on = 0;
    for (int x = 0; x < 24; ++x) on += f.at(y, x) > 0;
    EXPECT_EQ(on, 1) << "row " << y;
  }
}

TEST(Nms, ThinLinesAndZeroMapsAreFixedPoints) {
  ProbMap zero(16, 16);
  EXPECT_EQ(nms_thin(zero), zero);
  ProbMap h(16, 20), v(20, 16), d(20, 20);
  for (int x = 0; x < 20; ++x) h.at(7, x) = 0.8;
  for (int y = 0; y < 20; ++y) v.at(y, 5) = 0.4;
  for (int k = 0; k < 20; ++k) d.at(k, k) = 0.6;
  EXPECT_EQ(nms_thin(h), h);
  EXPECT_EQ(nms_thin(v), v);
  EXPECT_EQ(nms_thin(d), d);
}

TEST(Nms, ThinBinaryLeavesSkeleton) {
  BinaryMap block(12, 12);
  for (int y = 3; y < 9; ++y)
    for (int x = 2; x < 10; ++x) block.at(y, x) = 1;
  const BinaryMap t = thin_binary(block);
  EXPECT_GT(count_edges(t), 0u);
  EXPECT_LT(count_edges(t), 12u);
  for (size_t i = 0; i < t.size(); ++i) EXPECT_LE(t.px[i], block.px[i]);
}

TEST(CountTable, RejectsMissingAndRaggedInputs) {
  const auto mb = oracle::micro_benchmark();
  auto preds = single(mb);
  preds.erase(preds.begin() + 1);
  preds.erase(preds.begin() + 2);
  try {
    evaluate(preds, truths(mb), MatchConfig{});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("micro2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("micro4"), std::string::npos);
  }

  auto ragged = single(mb);
  for (auto& p : ragged) p.maps.push_back(p.maps[0]);
  ragged[3].maps.pop_back();
  EXPECT_THROW(evaluate_multi(ragged, truths(mb), MatchConfig{}), ValidationError);
  EXPECT_THROW(evaluate(ragged, truths(mb), MatchConfig{}), ValidationError);

  auto shapes = single(mb);
  shapes[0].maps[0] = ProbMap(10, 10);
  EXPECT_THROW(evaluate(shapes, truths(mb), MatchConfig{}), ValidationError);
}

TEST(CountTable, DeterministicAcrossWorkerCounts) {
  const auto mb = oracle::micro_benchmark();
  MatchConfig cfg;
  cfg.n_thresholds = 19;
  setenv("GED_NUM_WORKERS", "1", 1);
  const EvalResult a = evaluate(single(mb), truths(mb), cfg);
  setenv("GED_NUM_WORKERS", "4", 1);
  const EvalResult b = evaluate(single(mb), truths(mb), cfg);
  unsetenv("GED_NUM_WORKERS");
  EXPECT_EQ(a.ods, b.ods);
  EXPECT_EQ(a.ois, b.ois);
  EXPECT_EQ(a.ap, b.ap);
  for (size_t t = 0; t < a.curve.size(); ++t) EXPECT_EQ(a.curve[t].tp, b.curve[t].tp);
}

TEST(ResultsCsv, Layout) {
  TempDir dir("csv");
  const auto mb = oracle::micro_benchmark();
  MatchConfig cfg;
  cfg.n_thresholds = 5;
  const EvalResult r = evaluate(single(mb), truths(mb), cfg);
  const auto path = dir.path() / "r.csv";
  write_results_csv(path, r, {"nms=1", "multi=0"});
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 2u + 1u + 5u + 2u);
  EXPECT_EQ(lines[0], "# nms=1");
  EXPECT_EQ(lines[1], "# multi=0");
  EXPECT_EQ(lines[2], "threshold,precision,recall,f_measure");
  EXPECT_EQ(lines[8], "ods,ois,ap,ods_threshold");
  std::stringstream ss(lines[9]);
  double v[4];
  char comma;
  ss >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3];
  EXPECT_NEAR(v[0], r.ods, 1e-9);
  EXPECT_NEAR(v[1], r.ois, 1e-9);
  EXPECT_NEAR(v[2], r.ap, 1e-9);
  EXPECT_NEAR(v[3], r.ods_threshold, 1e-9);
}

}  // namespace
}  // namespace ged
