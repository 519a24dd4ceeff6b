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

#include "ged/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ged/error.hpp"

namespace ged {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

thread_local bool g_grad_enabled = true;

void check_same(const Var& a, const Var& b, const char* op) {
  require(a.value().same_shape(b.value()),
          std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
              shape_string(b.shape()));
}

Node& parent(Node& self, size_t i) { return *self.parents[i]; }

// Adds `src` into the parent's grad buffer when that parent is tracked.
void accumulate(Node& p, const double* src) {
  if (!p.requires_grad) return;
  Tensor& g = p.grad_buffer();
  double* dst = g.data();
  for (size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

// Unary elementwise op whose derivative depends only on input x and output y.
template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result(std::move(y), {a}, [dfdx](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
  });
}

// Rearranges x [C, H, W] into columns [C*k*k, Ho*Wo].
void im2col(const double* x, int c, int h, int w, int k, int stride, int pad, int ho,
            int wo, double* col) {
  const int n = ho * wo;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + (static_cast<size_t>(ci) * k * k + ky * k + kx) * n;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* out = row + oy * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, 0.0);
            continue;
          }
          const double* in = x + (static_cast<size_t>(ci) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            out[ox] = (ix >= 0 && ix < w) ? in[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int c, int h, int w, int k, int stride, int pad, int ho,
            int wo, double* x) {
  const int n = ho * wo;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + (static_cast<size_t>(ci) * k * k + ky * k + kx) * n;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* out = x + (static_cast<size_t>(ci) * h + iy) * w;
          const double* in = row + oy * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape());
  return grad;
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

double Var::item() const {
  require(node_->value.size() == 1, "item() on non-scalar " + shape_string(shape()));
  return node_->value[0];
}

void Var::backward() const {
  require(node_->value.size() == 1, "backward() needs a scalar root");
  if (!node_->requires_grad) return;

  // Post-order DFS so every node is processed after all of its consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!g_grad_enabled) return Var(std::move(n));
  const bool tracked =
      std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
  if (!tracked) return Var(std::move(n));
  n->requires_grad = true;
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.node());
  n->backward_fn = std::move(backward);
  return Var(std::move(n));
}

Var add(const Var& a, const Var& b) {
  check_same(a, b, "add");
  Tensor y(a.shape());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& self) {
    accumulate(parent(self, 0), self.grad.data());
    accumulate(parent(self, 1), self.grad.data());
  });
}

Var sub(const Var& a, const Var& b) {
  check_same(a, b, "sub");
  Tensor y(a.shape());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& self) {
    accumulate(parent(self, 0), self.grad.data());
    Node& pb = parent(self, 1);
    if (!pb.requires_grad) return;
    Tensor& g = pb.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
  });
}

Var mul(const Var& a, const Var& b) {
  check_same(a, b, "mul");
  Tensor y(a.shape());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt_op(const Var& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var silu(const Var& a) {
  return unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Var tanh_op(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_result(Tensor({1}, s), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    const double g0 = self.grad[0];
    for (double& g : p.grad_buffer().values()) g += g0;
  });
}

Var mean(const Var& a) {
  require(a.value().size() > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sum_scalars(const std::vector<Var>& terms) {
  require(!terms.empty(), "sum_scalars needs at least one term");
  double s = 0.0;
  for (const auto& t : terms) s += t.item();
  return make_result(Tensor({1}, s), terms, [](Node& self) {
    for (auto& p : self.parents) accumulate(*p, self.grad.data());
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  return make_result(a.value().reshaped(std::move(shape)), {a},
                     [](Node& self) { accumulate(parent(self, 0), self.grad.data()); });
}

Var transpose2d(const Var& a) {
  require(a.value().rank() == 2, "transpose2d needs a matrix");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor y({c, r});
  MapR(y.data(), c, r) = CMapR(a.value().data(), r, c).transpose();
  return make_result(std::move(y), {a}, [r, c](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    MapR(p.grad_buffer().data(), r, c) += CMapR(self.grad.data(), c, r).transpose();
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  require(x.rank() == 3 && z.rank() == 3 && x.dim(1) == z.dim(1) && x.dim(2) == z.dim(2),
          "concat_channels: spatial mismatch " + shape_string(x.shape()) + " vs " +
              shape_string(z.shape()));
  Tensor y({x.dim(0) + z.dim(0), x.dim(1), x.dim(2)});
  std::copy(x.data(), x.data() + x.size(), y.data());
  std::copy(z.data(), z.data() + z.size(), y.data() + x.size());
  const size_t na = x.size();
  return make_result(std::move(y), {a, b}, [na](Node& self) {
    accumulate(parent(self, 0), self.grad.data());
    accumulate(parent(self, 1), self.grad.data() + na);
  });
}

Var upsample_nearest2x(const Var& a) {
  const Tensor& x = a.value();
  require(x.rank() == 3, "upsample_nearest2x needs [C, H, W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci)
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx)
        y[(static_cast<size_t>(ci) * 2 * h + yy) * 2 * w + xx] =
            x[(static_cast<size_t>(ci) * h + yy / 2) * w + xx / 2];
  return make_result(std::move(y), {a}, [c, h, w](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int ci = 0; ci < c; ++ci)
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx)
          g[(static_cast<size_t>(ci) * h + yy / 2) * w + xx / 2] +=
              self.grad[(static_cast<size_t>(ci) * 2 * h + yy) * 2 * w + xx];
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& w = weight.value();
  require(x.value().rank() == 1 && w.rank() == 2 && w.dim(1) == x.value().dim(0),
          "linear: input " + shape_string(x.shape()) + " vs weight " + shape_string(w.shape()));
  require(bias.value().rank() == 1 && bias.value().dim(0) == w.dim(0), "linear: bias shape");
  const int out = w.dim(0), in = w.dim(1);
  Tensor y({out});
  Vec(y.data(), out) = CMapR(w.data(), out, in) * CVec(x.value().data(), in) +
                       CVec(bias.value().data(), out);
  return make_result(std::move(y), {x, weight, bias}, [out, in](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    Node& pb = parent(self, 2);
    CVec gy(self.grad.data(), out);
    if (px.requires_grad)
      Vec(px.grad_buffer().data(), in) += CMapR(pw.value.data(), out, in).transpose() * gy;
    if (pw.requires_grad)
      MapR(pw.grad_buffer().data(), out, in) += gy * CVec(px.value.data(), in).transpose();
    if (pb.requires_grad) Vec(pb.grad_buffer().data(), out) += gy;
  });
}

Var linear_rows(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& w = weight.value();
  require(x.value().rank() == 2 && w.rank() == 2 && w.dim(1) == x.value().dim(1),
          "linear_rows: input " + shape_string(x.shape()) + " vs weight " +
              shape_string(w.shape()));
  const int n = x.value().dim(0), in = w.dim(1), out = w.dim(0);
  const bool has_bias = bias.defined();
  Tensor y({n, out});
  MapR ym(y.data(), n, out);
  ym.noalias() = CMapR(x.value().data(), n, in) * CMapR(w.data(), out, in).transpose();
  if (has_bias) ym.rowwise() += CVec(bias.value().data(), out).transpose();
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_result(std::move(y), parents, [n, in, out, has_bias](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    CMapR gy(self.grad.data(), n, out);
    if (px.requires_grad)
      MapR(px.grad_buffer().data(), n, in).noalias() += gy * CMapR(pw.value.data(), out, in);
    if (pw.requires_grad)
      MapR(pw.grad_buffer().data(), out, in).noalias() +=
          gy.transpose() * CMapR(px.value.data(), n, in);
    if (has_bias && parent(self, 2).requires_grad)
      Vec(parent(self, 2).grad_buffer().data(), out) += gy.colwise().sum().transpose();
  });
}

Var matmul(const Var& a, const Var& b) {
  require(a.value().rank() == 2 && b.value().rank() == 2 && a.value().dim(1) == b.value().dim(0),
          "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  const int m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  Tensor y({m, n});
  MapR(y.data(), m, n).noalias() = CMapR(a.value().data(), m, k) * CMapR(b.value().data(), k, n);
  return make_result(std::move(y), {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    CMapR gy(self.grad.data(), m, n);
    if (pa.requires_grad)
      MapR(pa.grad_buffer().data(), m, k).noalias() +=
          gy * CMapR(pb.value.data(), k, n).transpose();
    if (pb.requires_grad)
      MapR(pb.grad_buffer().data(), k, n).noalias() +=
          CMapR(pa.value.data(), m, k).transpose() * gy;
  });
}

Var softmax_rows(const Var& a) {
  require(a.value().rank() == 2, "softmax_rows needs a matrix");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor y(a.shape());
  for (int i = 0; i < r; ++i) {
    const double* in = a.value().data() + static_cast<size_t>(i) * c;
    double* out = y.data() + static_cast<size_t>(i) * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += (out[j] = std::exp(in[j] - mx));
    for (int j = 0; j < c; ++j) out[j] /= z;
  }
  return make_result(std::move(y), {a}, [r, c](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int i = 0; i < r; ++i) {
      const double* s = self.value.data() + static_cast<size_t>(i) * c;
      const double* gy = self.grad.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += gy[j] * s[j];
      for (int j = 0; j < c; ++j) g[static_cast<size_t>(i) * c + j] += s[j] * (gy[j] - dot);
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  require(in.rank() == 3 && w.rank() == 4 && w.dim(1) == in.dim(0) && w.dim(2) == w.dim(3),
          "conv2d: input " + shape_string(in.shape()) + " vs weight " + shape_string(w.shape()));
  require(bias.value().rank() == 1 && bias.value().dim(0) == w.dim(0), "conv2d: bias shape");
  require(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  const int cin = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const int cout = w.dim(0), k = w.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wd + 2 * pad - k) / stride + 1;
  require(ho > 0 && wo > 0, "conv2d: kernel larger than padded input");
  const int kk = cin * k * k, n = ho * wo;

  // 1x1 stride-1 convolutions read the input directly as the column matrix.
  const bool direct = (k == 1 && stride == 1 && pad == 0);
  auto col = std::make_shared<std::vector<double>>();
  if (!direct) {
    col->resize(static_cast<size_t>(kk) * n);
    im2col(in.data(), cin, h, wd, k, stride, pad, ho, wo, col->data());
  }
  const double* colp = direct ? in.data() : col->data();

  Tensor y({cout, ho, wo});
  MapR ym(y.data(), cout, n);
  ym.noalias() = CMapR(w.data(), cout, kk) * CMapR(colp, kk, n);
  ym.colwise() += CVec(bias.value().data(), cout);

  return make_result(std::move(y), {x, weight, bias},
                     [=](Node& self) {
                       Node& px = parent(self, 0);
                       Node& pw = parent(self, 1);
                       Node& pb = parent(self, 2);
                       CMapR gy(self.grad.data(), cout, n);
                       const double* cp = direct ? px.value.data() : col->data();
                       if (pw.requires_grad)
                         MapR(pw.grad_buffer().data(), cout, kk).noalias() +=
                             gy * CMapR(cp, kk, n).transpose();
                       if (pb.requires_grad)
                         Vec(pb.grad_buffer().data(), cout) += gy.rowwise().sum();
                       if (px.requires_grad) {
                         if (direct) {
                           MapR(px.grad_buffer().data(), kk, n).noalias() +=
                               CMapR(pw.value.data(), cout, kk).transpose() * gy;
                         } else {
                           MatR dcol = CMapR(pw.value.data(), cout, kk).transpose() * gy;
                           col2im(dcol.data(), cin, h, wd, k, stride, pad, ho, wo,
                                  px.grad_buffer().data());
                         }
                       }
                     });
}

Var add_channel_bias(const Var& x, const Var& v) {
  const Tensor& in = x.value();
  require(in.rank() == 3 && v.value().rank() == 1 && v.value().dim(0) == in.dim(0),
          "add_channel_bias: " + shape_string(in.shape()) + " + " + shape_string(v.shape()));
  const int c = in.dim(0);
  const int hw = in.dim(1) * in.dim(2);
  Tensor y(in.shape());
  for (int ci = 0; ci < c; ++ci) {
    const double b = v.value()[ci];
    for (int i = 0; i < hw; ++i) {
      const size_t idx = static_cast<size_t>(ci) * hw + i;
      y[idx] = in[idx] + b;
    }
  }
  return make_result(std::move(y), {x, v}, [c, hw](Node& self) {
    accumulate(parent(self, 0), self.grad.data());
    Node& pv = parent(self, 1);
    if (!pv.requires_grad) return;
    Tensor& g = pv.grad_buffer();
    for (int ci = 0; ci < c; ++ci) {
      double s = 0.0;
      for (int i = 0; i < hw; ++i) s += self.grad[static_cast<size_t>(ci) * hw + i];
      g[ci] += s;
    }
  });
}

}  // namespace ged
