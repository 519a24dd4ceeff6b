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

#include "ged/latent_codec.hpp"

#include <algorithm>
#include <cmath>

namespace ged {

namespace {

constexpr int kQuad = kLatentDownsample / 2;  // quadrant side in pixels

// Haar sign of channel c for quadrant (qy, qx): ch0 +, ch1 by column,
// ch2 by row, ch3 by their product.
constexpr double haar_sign(int c, int qy, int qx) {
  const double sx = qx ? 1.0 : -1.0;
  const double sy = qy ? 1.0 : -1.0;
  switch (c) {
    case 0: return 1.0;
    case 1: return sx;
    case 2: return sy;
    default: return sx * sy;
  }
}

// 1-D linear interpolation taps from quadrant centers to pixel centers.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<double> w1;
};

Taps make_taps(int quads) {
  const int n = quads * kQuad;
  Taps t;
  t.i0.resize(n);
  t.i1.resize(n);
  t.w1.resize(n);
  for (int p = 0; p < n; ++p) {
    const double f = std::clamp((p + 0.5) / kQuad - 0.5, 0.0, quads - 1.0);
    t.i0[p] = static_cast<int>(f);
    t.i1[p] = std::min(t.i0[p] + 1, quads - 1);
    t.w1[p] = f - t.i0[p];
  }
  return t;
}

// Linear part of the decoder: [4, h, w] latent -> [8h, 8w] signed map.
Tensor decode_linear(const Tensor& z, const CodecConstants& k) {
  const int h = z.dim(1), w = z.dim(2);
  const int qh = 2 * h, qw = 2 * w;
  Tensor quad({qh, qw});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
          double v = 0.0;
          for (int c = 0; c < kLatentChannels; ++c)
            v += haar_sign(c, qy, qx) * z[(static_cast<size_t>(c) * h + i) * w + j] /
                 k.channel_scale[c];
          quad[static_cast<size_t>(2 * i + qy) * qw + 2 * j + qx] = v;
        }
  const Taps ty = make_taps(qh), tx = make_taps(qw);
  const int oh = qh * kQuad, ow = qw * kQuad;
  Tensor out({oh, ow});
  for (int y = 0; y < oh; ++y) {
    const double wy = ty.w1[y];
    const double* r0 = quad.data() + static_cast<size_t>(ty.i0[y]) * qw;
    const double* r1 = quad.data() + static_cast<size_t>(ty.i1[y]) * qw;
    for (int x = 0; x < ow; ++x) {
      const double wx = tx.w1[x];
      const double top = r0[tx.i0[x]] * (1 - wx) + r0[tx.i1[x]] * wx;
      const double bot = r1[tx.i0[x]] * (1 - wx) + r1[tx.i1[x]] * wx;
      out[static_cast<size_t>(y) * ow + x] = top * (1 - wy) + bot * wy;
    }
  }
  return out;
}

// Adjoint of decode_linear, accumulated into g_latent.
void decode_linear_adjoint(const Tensor& g_out, int h, int w, const CodecConstants& k,
                           Tensor& g_latent) {
  const int qh = 2 * h, qw = 2 * w;
  const int oh = qh * kQuad, ow = qw * kQuad;
  const Taps ty = make_taps(qh), tx = make_taps(qw);
  Tensor gq({qh, qw});
  for (int y = 0; y < oh; ++y) {
    const double wy = ty.w1[y];
    double* r0 = gq.data() + static_cast<size_t>(ty.i0[y]) * qw;
    double* r1 = gq.data() + static_cast<size_t>(ty.i1[y]) * qw;
    for (int x = 0; x < ow; ++x) {
      const double g = g_out[static_cast<size_t>(y) * ow + x];
      const double wx = tx.w1[x];
      r0[tx.i0[x]] += g * (1 - wy) * (1 - wx);
      r0[tx.i1[x]] += g * (1 - wy) * wx;
      r1[tx.i0[x]] += g * wy * (1 - wx);
      r1[tx.i1[x]] += g * wy * wx;
    }
  }
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
          const double g = gq[static_cast<size_t>(2 * i + qy) * qw + 2 * j + qx];
          for (int c = 0; c < kLatentChannels; ++c)
            g_latent[(static_cast<size_t>(c) * h + i) * w + j] +=
                haar_sign(c, qy, qx) * g / k.channel_scale[c];
        }
}

}  // namespace

bool LatentMap::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Tensor to_chw(const LatentMap& latent) {
  Tensor t({kLatentChannels, latent.height, latent.width});
  for (int c = 0; c < kLatentChannels; ++c)
    for (int y = 0; y < latent.height; ++y)
      for (int x = 0; x < latent.width; ++x)
        t[(static_cast<size_t>(c) * latent.height + y) * latent.width + x] = latent.at(y, x, c);
  return t;
}

LatentMap from_chw(const Tensor& chw, int source_height, int source_width) {
  require(chw.rank() == 3 && chw.dim(0) == kLatentChannels,
          "latent tensor must be [4, h, w], got " + shape_string(chw.shape()));
  const int h = chw.dim(1), w = chw.dim(2);
  LatentMap m(h, w, source_height, source_width);
  for (int c = 0; c < kLatentChannels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m.at(y, x, c) = chw[(static_cast<size_t>(c) * h + y) * w + x];
  return m;
}

std::string to_string(CodecKind kind) {
  return kind == CodecKind::kAnalytic ? "analytic" : "tiny_trainable";
}

CodecKind codec_kind_from_string(const std::string& name) {
  if (name == "analytic") return CodecKind::kAnalytic;
  if (name == "tiny_trainable") return CodecKind::kTinyTrainable;
  throw ValidationError("unknown codec kind '" + name + "'");
}

LatentCodec::LatentCodec(CodecConfig config, CodecConstants constants)
    : config_(config), constants_(constants) {
  require(config_.channels == kLatentChannels, "codec channels are fixed at 4");
  require(config_.downsample == kLatentDownsample, "codec downsample is fixed at 8");
  require(config_.kind == CodecKind::kAnalytic,
          "the tiny_trainable codec is not shipped in this build; use 'analytic'");
  for (double s : constants_.channel_scale) require(s > 0.0, "codec channel scales must be > 0");
}

LatentMap LatentCodec::encode_signed(const Plane<double>& s) const {
  require(s.height > 0 && s.width > 0 && s.height % kLatentDownsample == 0 &&
              s.width % kLatentDownsample == 0,
          "codec input " + std::to_string(s.height) + "x" + std::to_string(s.width) +
              " is not divisible by 8; pad it first");
  const int h = s.height / kLatentDownsample, w = s.width / kLatentDownsample;
  LatentMap out(h, w, s.height, s.width);
  constexpr double inv = 1.0 / (kQuad * kQuad);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double m[2][2] = {};
      for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
          double acc = 0.0;
          for (int dy = 0; dy < kQuad; ++dy)
            for (int dx = 0; dx < kQuad; ++dx)
              acc += s.at(i * kLatentDownsample + qy * kQuad + dy,
                          j * kLatentDownsample + qx * kQuad + dx);
          m[qy][qx] = acc * inv;
        }
      for (int c = 0; c < kLatentChannels; ++c) {
        double v = 0.0;
        for (int qy = 0; qy < 2; ++qy)
          for (int qx = 0; qx < 2; ++qx) v += haar_sign(c, qy, qx) * m[qy][qx];
        out.at(i, j, c) = constants_.channel_scale[c] * v / 4.0;
      }
    }
  return out;
}

LatentMap LatentCodec::encode_image(const RgbImage& image) const {
  Plane<double> s(image.height, image.width);
  const auto& lw = constants_.luma_weights;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      s.at(y, x) = 2.0 * (lw[0] * image.at(y, x, 0) + lw[1] * image.at(y, x, 1) +
                          lw[2] * image.at(y, x, 2)) -
                   1.0;
  return encode_signed(s);
}

LatentMap LatentCodec::encode_edge(const BinaryMap& edge_map) const {
  return encode_image(edge_to_rgb(edge_map));
}

Var LatentCodec::decode_to_edge(const Var& latent_chw) const {
  const Tensor& z = latent_chw.value();
  require(z.rank() == 3 && z.dim(0) == kLatentChannels,
          "decode expects a [4, h, w] latent, got " + shape_string(z.shape()));
  const int h = z.dim(1), w = z.dim(2);
  const CodecConstants k = constants_;
  Var u = make_result(decode_linear(z, k), {latent_chw}, [h, w, k](Node& self) {
    Node& p = *self.parents[0];
    if (p.requires_grad) decode_linear_adjoint(self.grad, h, w, k, p.grad_buffer());
  });
  // Three identical output channels, so their mean is the curve itself.
  Var rgb = tanh_op(scale(add_scalar(u, -k.edge_pivot), k.edge_gain));
  return clamp(add_scalar(scale(rgb, 0.5), 0.5), 0.0, 1.0);
}

std::array<Plane<double>, 3> LatentCodec::decode_rgb(const LatentMap& latent) const {
  require(latent.all_finite(), "decode: latent has non-finite values");
  const Tensor u = decode_linear(to_chw(latent), constants_);
  Plane<double> ch(u.dim(0), u.dim(1));
  for (size_t i = 0; i < ch.size(); ++i)
    ch.px[i] = std::tanh(constants_.edge_gain * (u[i] - constants_.edge_pivot));
  return {ch, ch, ch};
}

ProbMap LatentCodec::decode_to_edge(const LatentMap& latent) const {
  const auto rgb = decode_rgb(latent);
  const int sh = latent.source_height > 0 ? latent.source_height : rgb[0].height;
  const int sw = latent.source_width > 0 ? latent.source_width : rgb[0].width;
  require(sh <= rgb[0].height && sw <= rgb[0].width, "latent source shape exceeds decoded size");
  ProbMap out(sh, sw);
  for (int y = 0; y < sh; ++y)
    for (int x = 0; x < sw; ++x) {
      const double m = (rgb[0].at(y, x) + rgb[1].at(y, x) + rgb[2].at(y, x)) / 3.0;
      out.at(y, x) = std::clamp((m + 1.0) / 2.0, 0.0, 1.0);
    }
  return out;
}

RgbImage pad_reflect(const RgbImage& image, int multiple) {
  require(multiple >= 1 && image.height > 0 && image.width > 0, "pad_reflect: bad arguments");
  const int h = (image.height + multiple - 1) / multiple * multiple;
  const int w = (image.width + multiple - 1) / multiple * multiple;
  if (h == image.height && w == image.width) return image;
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  RgbImage out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = image.at(reflect(y, image.height), reflect(x, image.width), c);
  return out;
}

}  // namespace ged
