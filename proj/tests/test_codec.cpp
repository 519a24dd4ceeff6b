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

#include <algorithm>
#include <cmath>

#include "ged/dataset.hpp"
#include "ged/evaluation.hpp"
#include "ged/latent_codec.hpp"
#include "test_util.hpp"

namespace ged {
namespace {

using testing::random_tensor;

RgbImage random_image(int h, int w, Rng& rng) {
  RgbImage im(h, w);
  for (double& v : im.data) v = rng.uniform();
  return im;
}

// Block statistics straight from the pixels: mean, right-minus-left,
// bottom-minus-top and checkerboard contrast of the 8x8 block.
std::array<double, 4> block_oracle(const RgbImage& im, int bi, int bj) {
  double mean = 0, lr = 0, tb = 0, diag = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const int py = bi * 8 + y, px = bj * 8 + x;
      const double lum =
          0.299 * im.at(py, px, 0) + 0.587 * im.at(py, px, 1) + 0.114 * im.at(py, px, 2);
      const double s = 2 * lum - 1;
      const double sx = x < 4 ? -1 : 1, sy = y < 4 ? -1 : 1;
      mean += s;
      lr += sx * s;
      tb += sy * s;
      diag += sx * sy * s;
    }
  return {mean / 64, 2 * lr / 64, 2 * tb / 64, 2 * diag / 64};
}

TEST(LatentCodec, EncodeMatchesBlockOracle) {
  Rng rng(3);
  const RgbImage im = random_image(24, 32, rng);
  const LatentMap z = LatentCodec().encode_image(im);
  ASSERT_EQ(z.height, 3);
  ASSERT_EQ(z.width, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      const auto want = block_oracle(im, i, j);
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(z.at(i, j, c), want[c], 1e-12);
    }
}

TEST(LatentCodec, ShapeAndDeterminism) {
  Rng rng(1);
  const RgbImage im = random_image(320, 320, rng);
  LatentCodec codec;
  const LatentMap a = codec.encode_image(im);
  EXPECT_EQ(a.height, 40);
  EXPECT_EQ(a.width, 40);
  EXPECT_EQ(a.data.size(), 40u * 40 * 4);
  EXPECT_EQ(a, codec.encode_image(im));
}

TEST(LatentCodec, ConstantGrayHasNoGradientResponse) {
  const LatentMap z = LatentCodec().encode_image(RgbImage(16, 16, 0.5));
  for (int i = 0; i < z.height; ++i)
    for (int j = 0; j < z.width; ++j)
      for (int c = 1; c < 4; ++c) EXPECT_EQ(z.at(i, j, c), 0.0);
}

TEST(LatentCodec, RejectsNonDivisibleInput) {
  EXPECT_THROW(LatentCodec().encode_image(RgbImage(20, 16)), ValidationError);
  EXPECT_THROW(LatentCodec().encode_edge(BinaryMap(16, 9)), ValidationError);
}

TEST(LatentCodec, EdgeRescaleRule) {
  LatentCodec codec;
  EXPECT_EQ(codec.encode_edge(BinaryMap(16, 16, 0)), codec.encode_image(RgbImage(16, 16, 0.0)));
  EXPECT_EQ(codec.encode_edge(BinaryMap(16, 16, 1)), codec.encode_image(RgbImage(16, 16, 1.0)));
  const LatentMap zero = codec.encode_edge(BinaryMap(16, 16, 0));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(zero.at(i, j, 0), -1.0, 1e-12);
}

TEST(LatentCodec, Linearity) {
  Rng rng(5);
  LatentCodec codec;
  Plane<double> x(32, 40), y(32, 40), mix(32, 40);
  const double a = 0.7, b = -1.3;
  for (size_t i = 0; i < x.size(); ++i) {
    x.px[i] = rng.normal();
    y.px[i] = rng.normal();
    mix.px[i] = a * x.px[i] + b * y.px[i];
  }
  const LatentMap zx = codec.encode_signed(x), zy = codec.encode_signed(y),
                  zm = codec.encode_signed(mix);
  for (size_t i = 0; i < zm.data.size(); ++i)
    EXPECT_NEAR(zm.data[i], a * zx.data[i] + b * zy.data[i], 1e-6);
}

TEST(LatentCodec, SinglePixelEdgeIsLocal) {
  LatentCodec codec;
  const LatentMap base = codec.encode_edge(BinaryMap(64, 64, 0));
  for (auto [py, px] : {std::pair{0, 0}, std::pair{19, 45}, std::pair{63, 8}}) {
    BinaryMap m(64, 64, 0);
    m.at(py, px) = 1;
    const LatentMap z = codec.encode_edge(m);
    for (int i = 0; i < z.height; ++i)
      for (int j = 0; j < z.width; ++j) {
        bool differs = false;
        for (int c = 0; c < 4; ++c) differs |= z.at(i, j, c) != base.at(i, j, c);
        EXPECT_EQ(differs, i == py / 8 && j == px / 8) << i << "," << j;
      }
  }
}

TEST(LatentCodec, ZeroMapDecodesNearZero) {
  LatentCodec codec;
  const ProbMap d = codec.decode_to_edge(codec.encode_edge(BinaryMap(320, 320, 0)));
  EXPECT_LE(*std::max_element(d.px.begin(), d.px.end()), 0.05);
}

TEST(LatentCodec, DecodeRangeAndShape) {
  Rng rng(7);
  LatentCodec codec;
  for (int trial = 0; trial < 5; ++trial) {
    LatentMap z(5, 6, 40, 48);
    for (double& v : z.data) v = 3.0 * rng.normal();
    const ProbMap d = codec.decode_to_edge(z);
    EXPECT_EQ(d.height, 40);
    EXPECT_EQ(d.width, 48);
    for (double v : d.px) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(LatentCodec, DecodeCropsToSourceShape) {
  LatentCodec codec;
  const RgbImage padded = pad_reflect(RgbImage(21, 30, 0.2));
  EXPECT_EQ(padded.height, 24);
  EXPECT_EQ(padded.width, 32);
  LatentMap z = codec.encode_image(padded);
  z.source_height = 21;
  z.source_width = 30;
  const ProbMap d = codec.decode_to_edge(z);
  EXPECT_EQ(d.height, 21);
  EXPECT_EQ(d.width, 30);
}

TEST(LatentCodec, PadReflectMirrorsBorder) {
  RgbImage im(3, 5);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) im.at(y, x, c) = 10 * y + x + 0.1 * c;
  const RgbImage p = pad_reflect(im);
  ASSERT_EQ(p.height, 8);
  ASSERT_EQ(p.width, 8);
  // Reflection without repeating the edge row: rows 0 1 2 1 0 1 2 1.
  EXPECT_EQ(p.at(3, 0, 0), im.at(1, 0, 0));
  EXPECT_EQ(p.at(4, 0, 0), im.at(0, 0, 0));
  EXPECT_EQ(p.at(0, 5, 2), im.at(0, 3, 2));
  EXPECT_EQ(p.at(0, 6, 1), im.at(0, 2, 1));
  EXPECT_EQ(pad_reflect(p), p);
}

TEST(LatentCodec, RoundTripFidelityOnSyntheticMaps) {
  LatentCodec codec;
  Rng rng(0);
  std::vector<PredictionSet> preds;
  std::vector<GroundTruth> gts;
  for (int i = 0; i < 6; ++i) {
    const AnnotatedImage a = render_synthetic_image(rng, 320, "rt" + std::to_string(i));
    const BinaryMap& y = a.annotations[0];
    const ProbMap d = codec.decode_to_edge(codec.encode_edge(y));
    ProbMap b(d.height, d.width);
    for (size_t j = 0; j < b.size(); ++j) b.px[j] = d.px[j] >= 0.5 ? 1.0 : 0.0;
    preds.push_back({a.id, {b}});
    gts.push_back({a.id, {y}});
  }
  MatchConfig config;
  config.n_thresholds = 1;
  EXPECT_GE(evaluate(preds, gts, config).ods, 0.8);
}

TEST(LatentCodec, DifferentiableDecodeAgreesAndHasGradient) {
  Rng rng(11);
  LatentCodec codec;
  Tensor z = random_tensor({4, 2, 3}, rng, 0.6);
  for (size_t i = 0; i < 6; ++i) z[i] -= 0.8;
  const ProbMap plain = codec.decode_to_edge(from_chw(z, 16, 24));
  const Var decoded = codec.decode_to_edge(Var::constant(z));
  ASSERT_EQ(decoded.shape(), (std::vector<int>{16, 24}));
  for (size_t i = 0; i < plain.size(); ++i) EXPECT_NEAR(decoded.value()[i], plain.px[i], 1e-12);

  Var leaf = Var::leaf(z, true);
  const Tensor weights = random_tensor({16, 24}, rng);
  const auto f = [&] { return sum(mul(codec.decode_to_edge(leaf), Var::constant(weights))); };
  EXPECT_LT(testing::gradient_error(leaf, f), 1e-4);
}

TEST(LatentCodec, TinyTrainableKindIsRejected) {
  EXPECT_EQ(codec_kind_from_string("tiny_trainable"), CodecKind::kTinyTrainable);
  EXPECT_THROW(LatentCodec(CodecConfig{CodecKind::kTinyTrainable}), ValidationError);
  EXPECT_THROW(codec_kind_from_string("vae"), ValidationError);
}

}  // namespace
}  // namespace ged
