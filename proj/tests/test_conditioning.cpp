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

#include <cmath>
#include <fstream>

#include "ged/conditioning.hpp"
#include "ged/denoiser.hpp"
#include "test_util.hpp"

namespace ged {
namespace {

using testing::TempDir;

double cosine(const Tensor& a, const Tensor& b) {
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::string random_caption(Rng& rng) {
  static const char* words[] = {"a",     "dog",   "on",     "the",  "grass", "red",
                                "house", "under", "cloudy", "sky",  "two",   "birds",
                                "near",  "water", "old",    "tree", "city",  "street"};
  std::string s;
  const int n = rng.range(3, 9);
  for (int i = 0; i < n; ++i) s += std::string(i ? " " : "") + words[rng.below(18)];
  return s;
}

TEST(TextEmbedding, DeterministicWithUnitRows) {
  const TextEmbedding a = embed_caption("a photo of a cat", 8, 64);
  const TextEmbedding b = embed_caption("a photo of a cat", 8, 64);
  EXPECT_EQ(a.data.storage(), b.data.storage());
  EXPECT_EQ(a.caption, "a photo of a cat");
  for (int r = 0; r < 8; ++r) {
    double mu = 0, var = 0;
    for (int c = 0; c < 64; ++c) mu += a.data[r * 64 + c];
    mu /= 64;
    for (int c = 0; c < 64; ++c) var += std::pow(a.data[r * 64 + c] - mu, 2);
    EXPECT_NEAR(mu, 0.0, 1e-12);
    EXPECT_NEAR(var / 64, 1.0, 1e-12);
  }
}

TEST(TextEmbedding, DefaultShape) {
  const TextEmbedding e = embed_caption("x");
  EXPECT_EQ(e.data.shape(), (std::vector<int>{77, 1024}));
}

TEST(TextEmbedding, DifferentCaptionsAreNearlyOrthogonal) {
  Rng rng(42);
  int pairs = 0;
  while (pairs < 100) {
    const std::string a = random_caption(rng), b = random_caption(rng);
    if (a == b) continue;
    EXPECT_LT(std::abs(cosine(embed_caption(a).data, embed_caption(b).data)), 0.2) << a << " | " << b;
    ++pairs;
  }
}

TEST(TextEmbedding, EmptyCaptionIsFixedNullEmbedding) {
  const TextEmbedding a = embed_caption("", 4, 16), b = embed_caption("", 4, 16);
  EXPECT_EQ(a.data.storage(), b.data.storage());
  EXPECT_NE(a.data.storage(), embed_caption(" ", 4, 16).data.storage());
}

TEST(TextEmbedding, CaptionFile) {
  TempDir dir("captions");
  const auto path = dir.path() / "captions.json";
  std::ofstream(path) << R"({"img1": "a boat", "img2": "two cows"})";
  const CaptionTable t = load_captions(path);
  EXPECT_EQ(t.at("img2"), "two cows");
  EXPECT_THROW(load_captions(dir.path() / "nope.json"), IoError);
  std::ofstream(dir.path() / "bad.json") << "[1, 2";
  EXPECT_THROW(load_captions(dir.path() / "bad.json"), ValidationError);
}

TEST(TimeEmbedding, SinusoidMatchesFormula) {
  const Tensor e = sinusoidal_embedding(37, 16);
  for (int i = 0; i < 8; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / 8);
    EXPECT_NEAR(e[i], std::sin(37 * freq), 1e-12);
    EXPECT_NEAR(e[8 + i], std::cos(37 * freq), 1e-12);
  }
  EXPECT_THROW(sinusoidal_embedding(-1, 16), ValidationError);
  EXPECT_THROW(sinusoidal_embedding(1, 15), ValidationError);
}

TEST(TimeEmbedding, DistinctStepsGiveDistinctVectors) {
  for (int t = 0; t < 50; ++t)
    EXPECT_NE(sinusoidal_embedding(t, 32).storage(), sinusoidal_embedding(t + 1, 32).storage());
}

TEST(GranularityEncoder, ShapeSentinelAndRange) {
  ParameterSet ps;
  Rng rng(0);
  GranularityEncoder enc(ps, "gran", 24, rng);
  EXPECT_EQ(ps.count("gran"), 24u + 24 + 24 * 24 + 24);
  EXPECT_EQ(enc(0.3).shape(), std::vector<int>{24});
  const Tensor off = enc(std::nullopt).value();
  for (double v : off.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(enc(1.5), ValidationError);
  EXPECT_THROW(enc(-0.01), ValidationError);
  EXPECT_NE(enc(0.0).value().storage(), enc(1.0).value().storage());
  EXPECT_EQ(enc(0.4).value().storage(), enc(0.4).value().storage());
}

TEST(GranularityEncoder, DifferentiableInGranularity) {
  ParameterSet ps;
  Rng rng(9);
  GranularityEncoder enc(ps, "gran", 12, rng);
  const Tensor w = testing::random_tensor({12}, rng);
  for (double g0 : {0.0, 0.25, 0.8}) {
    Var g = Var::leaf(Tensor({1}, g0), true);
    const auto f = [&] { return sum(mul(enc.encode(g), Var::constant(w))); };
    EXPECT_LT(testing::gradient_error(g, f), 1e-4);
  }
}

TEST(GranularityEncoder, TwoAffineLayersWithSiluBetween) {
  ParameterSet ps;
  Rng rng(4);
  GranularityEncoder enc(ps, "gran", 6, rng);
  const Tensor& w1 = ps.at("gran.fc1.weight").var.value();
  const Tensor& b1 = ps.at("gran.fc1.bias").var.value();
  const Tensor& w2 = ps.at("gran.fc2.weight").var.value();
  const Tensor& b2 = ps.at("gran.fc2.bias").var.value();
  const double g = 0.65;
  std::vector<double> hidden(6);
  for (int i = 0; i < 6; ++i) {
    const double a = w1[i] * g + b1[i];
    hidden[i] = a / (1 + std::exp(-a));
  }
  const Tensor out = enc(g).value();
  for (int o = 0; o < 6; ++o) {
    double want = b2[o];
    for (int i = 0; i < 6; ++i) want += w2[o * 6 + i] * hidden[i];
    EXPECT_NEAR(out[o], want, 1e-12);
  }
}

TEST(Fuse, AdditiveCommutativeAndChecked) {
  Rng rng(2);
  const Tensor a = testing::random_tensor({10}, rng), b = testing::random_tensor({10}, rng);
  const Tensor ab = fuse(a, b), ba = fuse(b, a);
  EXPECT_EQ(ab.storage(), ba.storage());
  for (size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(ab[i], a[i] + b[i]);
    EXPECT_NEAR(ab[i] - a[i], b[i], 1e-15);
  }
  EXPECT_EQ(fuse(a, Tensor({10})).storage(), a.storage());
  EXPECT_THROW(fuse(a, Tensor({9})), ValidationError);
  EXPECT_THROW(fuse(Var::constant(a), Var::constant(Tensor({3}))), ValidationError);
}

UNetConfig tiny_config(GranularityStrategy s = GranularityStrategy::kEncoding) {
  UNetConfig c;
  c.base_channels = 8;
  c.stage_multipliers = {1, 2};
  c.attention_stages = {1};
  c.text_tokens = 4;
  c.text_width = 16;
  c.strategy = s;
  return c;
}

TEST(FusedEmbedding, SentinelGivesTimeEmbeddingExactly) {
  Denoiser model(tiny_config());
  const Tensor ft = model.time_embedding()(1).value();
  EXPECT_EQ(model.fused_embedding(1, std::nullopt).value().storage(), ft.storage());
  const Tensor fg = model.granularity_encoder()(0.5).value();
  const Tensor fused = model.fused_embedding(1, 0.5).value();
  for (size_t i = 0; i < ft.size(); ++i) EXPECT_EQ(fused[i], ft[i] + fg[i]);
}

TEST(FusedEmbedding, AlternativeStrategies) {
  EXPECT_EQ(timestep_for_granularity(0.0), 0);
  EXPECT_EQ(timestep_for_granularity(0.4567), 457);
  EXPECT_EQ(timestep_for_granularity(1.0), 1000);
  EXPECT_THROW(timestep_for_granularity(1.2), ValidationError);

  Denoiser by_step(tiny_config(GranularityStrategy::kTimeStep));
  EXPECT_EQ(by_step.fused_embedding(1, 0.3).value().storage(),
            by_step.time_embedding()(300).value().storage());
  EXPECT_EQ(by_step.fused_embedding(1, std::nullopt).value().storage(),
            by_step.time_embedding()(1).value().storage());

  const std::string p = granularity_prompt("a cat", 0.25);
  EXPECT_EQ(p.rfind("a cat ", 0), 0u);
  EXPECT_NE(p.find("granularity of 0.25"), std::string::npos);

  Denoiser by_text(tiny_config(GranularityStrategy::kTextPrompt));
  const TextEmbedding text = embed_caption("a cat", 4, 16);
  Tensor x({4, 8, 8});
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.1 * i);
  const Tensor y0 = by_text.forward(Var::constant(x), 1, text, 0.0).value();
  const Tensor y1 = by_text.forward(Var::constant(x), 1, text, 1.0).value();
  EXPECT_NE(y0.storage(), y1.storage());

  for (auto s : {GranularityStrategy::kEncoding, GranularityStrategy::kTimeStep,
                 GranularityStrategy::kTextPrompt})
    EXPECT_EQ(granularity_strategy_from_string(to_string(s)), s);
  EXPECT_THROW(granularity_strategy_from_string("magic"), ValidationError);
}

}  // namespace
}  // namespace ged
