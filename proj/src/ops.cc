// Copyright (c) the UGICM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ugicm/ops.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "ugicm/errors.h"

namespace ugicm {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Upper bound on the number of im2col entries materialized at once.
constexpr size_t kColBudget = size_t{1} << 22;

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    Fail(ErrorKind::kShapeMismatch, std::string(op) + ": " +
                                        a.shape().str() + " vs " +
                                        b.shape().str());
  }
}

Tensor& ParentGrad(Node& node, size_t i) {
  return node.parents[i]->GradBuffer();
}
const Tensor& ParentValue(const Node& node, size_t i) {
  return node.parents[i]->value;
}
bool ParentNeedsGrad(const Node& node, size_t i) {
  return i < node.parents.size() && node.parents[i] != nullptr &&
         node.parents[i]->requires_grad;
}

// Geometry of a 2-D convolution over one image.
struct ConvGeometry {
  int channels;
  int height;
  int width;
  int kernel;
  int stride;
  int pad;
  int out_h;
  int out_w;

  int col_rows() const { return channels * kernel * kernel; }
  int RowsPerChunk() const {
    const size_t per_row = static_cast<size_t>(col_rows()) * out_w;
    return static_cast<int>(
        std::clamp<size_t>(kColBudget / std::max<size_t>(per_row, 1), 1,
                           static_cast<size_t>(out_h)));
  }
};

// Unfolds output rows [r0, r1) into a row-major (C*k*k, (r1-r0)*out_w) matrix.
void Im2Col(const ConvGeometry& g, const double* image, int r0, int r1,
            double* col) {
  const int ncols = (r1 - r0) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = image + static_cast<size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        double* dst =
            col + static_cast<size_t>((c * g.kernel + ki) * g.kernel + kj) *
                      ncols;
        for (int oy = r0; oy < r1; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          double* out = dst + static_cast<size_t>(oy - r0) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(out, out + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            out[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col: scatters-adds the column matrix back into the image.
void Col2Im(const ConvGeometry& g, const double* col, int r0, int r1,
            double* image) {
  const int ncols = (r1 - r0) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    double* plane = image + static_cast<size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const double* src =
            col + static_cast<size_t>((c * g.kernel + ki) * g.kernel + kj) *
                      ncols;
        for (int oy = r0; oy < r1; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.height) continue;
          const double* in = src + static_cast<size_t>(oy - r0) * g.out_w;
          double* dst = plane + static_cast<size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.width) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

void AddBias(Tensor& y, const Tensor& bias) {
  const Shape& s = y.shape();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double* p = y.plane(n, c);
      const double b = bias[c];
      for (size_t i = 0; i < s.plane(); ++i) p[i] += b;
    }
  }
}

void AccumulateBiasGrad(const Tensor& dy, Tensor& dbias) {
  const Shape& s = dy.shape();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* p = dy.plane(n, c);
      double acc = 0.0;
      for (size_t i = 0; i < s.plane(); ++i) acc += p[i];
      dbias[c] += acc;
    }
  }
}

// Interpolation matrix (out, in) for half-pixel-centred bilinear resampling.
RowMat ResizeMatrix(int in, int out) {
  RowMat m = RowMat::Zero(out, in);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const double frac = src - i0;
    m(o, i0) += 1.0 - frac;
    m(o, i1) += frac;
  }
  return m;
}

double NormalCdf(double t) { return 0.5 * std::erfc(-t * std::numbers::sqrt2 / 2.0); }
double NormalPdf(double t) {
  return std::exp(-0.5 * t * t) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

}  // namespace

Var Add(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Add");
  Tensor out = a.value();
  out.Add(b.value());
  return MakeResult(std::move(out), {a, b}, [](Node& self) {
    for (size_t i = 0; i < 2; ++i) {
      if (ParentNeedsGrad(self, i)) ParentGrad(self, i).Add(self.grad);
    }
  });
}

Var Sub(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return MakeResult(std::move(out), {a, b}, [](Node& self) {
    if (ParentNeedsGrad(self, 0)) ParentGrad(self, 0).Add(self.grad);
    if (ParentNeedsGrad(self, 1)) {
      Tensor& g = ParentGrad(self, 1);
      for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var Mul(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return MakeResult(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = ParentValue(self, 0);
    const Tensor& bv = ParentValue(self, 1);
    if (ParentNeedsGrad(self, 0)) {
      Tensor& g = ParentGrad(self, 0);
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (ParentNeedsGrad(self, 1)) {
      Tensor& g = ParentGrad(self, 1);
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var Scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return MakeResult(std::move(out), {a}, [s](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var AddScalar(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v += s;
  return MakeResult(std::move(out), {a},
                    [](Node& self) { ParentGrad(self, 0).Add(self.grad); });
}

Var AddConstant(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape()) {
    Fail(ErrorKind::kShapeMismatch, "AddConstant: " + a.shape().str() +
                                        " vs " + c.shape().str());
  }
  Tensor out = a.value();
  out.Add(c);
  return MakeResult(std::move(out), {a},
                    [](Node& self) { ParentGrad(self, 0).Add(self.grad); });
}

Var LeakyRelu(const Var& a, double slope) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    if (v < 0.0) v *= slope;
  }
  return MakeResult(std::move(out), {a}, [slope](Node& self) {
    const Tensor& x = ParentValue(self, 0);
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) {
      g[i] += x[i] < 0.0 ? slope * self.grad[i] : self.grad[i];
    }
  });
}

Var Softplus(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    v = v > 30.0 ? v : std::log1p(std::exp(v));
  }
  return MakeResult(std::move(out), {a}, [](Node& self) {
    const Tensor& x = ParentValue(self, 0);
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] / (1.0 + std::exp(-x[i]));
    }
  });
}

Var Reshape(const Var& a, const Shape& shape) {
  return MakeResult(a.value().Reshaped(shape), {a}, [](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var Tanh(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return MakeResult(std::move(out), {a}, [](Node& self) {
    const Tensor& y = self.value;
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * (1.0 - y[i] * y[i]);
    }
  });
}

Var LowerBound(const Var& a, double floor) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::max(v, floor);
  return MakeResult(std::move(out), {a}, [floor](Node& self) {
    const Tensor& x = ParentValue(self, 0);
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) {
      if (x[i] >= floor) g[i] += self.grad[i];
    }
  });
}

Var Clamp(const Var& a, double lo, double hi) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return MakeResult(std::move(out), {a}, [lo, hi](Node& self) {
    const Tensor& x = ParentValue(self, 0);
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) {
      if (x[i] >= lo && x[i] <= hi) g[i] += self.grad[i];
    }
  });
}

Var Conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    Fail(ErrorKind::kShapeMismatch,
         "Conv2d: input " + xs.str() + " weight " + ws.str());
  }
  const int k = ws.h;
  const int out_h = (xs.h + 2 * pad - k) / stride + 1;
  const int out_w = (xs.w + 2 * pad - k) / stride + 1;
  if (out_h <= 0 || out_w <= 0) {
    Fail(ErrorKind::kShapeMismatch, "Conv2d: input too small " + xs.str());
  }
  const ConvGeometry g{xs.c, xs.h, xs.w, k, stride, pad, out_h, out_w};
  Tensor out(Shape{xs.n, ws.n, out_h, out_w});

  const Eigen::Map<const RowMat> wmat(weight.value().data(), ws.n,
                                      g.col_rows());
  const int chunk_rows = g.RowsPerChunk();
  std::vector<double> col;
  for (int n = 0; n < xs.n; ++n) {
    const double* image = x.value().plane(n, 0);
    double* y = out.plane(n, 0);
    for (int r0 = 0; r0 < out_h; r0 += chunk_rows) {
      const int r1 = std::min(out_h, r0 + chunk_rows);
      const int ncols = (r1 - r0) * out_w;
      col.resize(static_cast<size_t>(g.col_rows()) * ncols);
      Im2Col(g, image, r0, r1, col.data());
      const Eigen::Map<const RowMat> colmat(col.data(), g.col_rows(), ncols);
      StridedMap ymap(y + static_cast<size_t>(r0) * out_w, ws.n, ncols,
                      Eigen::OuterStride<>(out_h * out_w));
      ymap.noalias() = wmat * colmat;
    }
  }
  if (bias.defined()) AddBias(out, bias.value());

  std::vector<Var> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return MakeResult(std::move(out), std::move(parents), [g](Node& self) {
    const Tensor& xv = ParentValue(self, 0);
    const Tensor& wv = ParentValue(self, 1);
    const Shape ys = self.value.shape();
    const bool need_x = ParentNeedsGrad(self, 0);
    const bool need_w = ParentNeedsGrad(self, 1);
    if (ParentNeedsGrad(self, 2)) AccumulateBiasGrad(self.grad, ParentGrad(self, 2));
    if (!need_x && !need_w) return;

    const Eigen::Map<const RowMat> wmat(wv.data(), ys.c, g.col_rows());
    Tensor* dx = need_x ? &ParentGrad(self, 0) : nullptr;
    RowMat dw;
    if (need_w) dw = RowMat::Zero(ys.c, g.col_rows());
    const int chunk_rows = g.RowsPerChunk();
    std::vector<double> col;
    RowMat dcol;
    for (int n = 0; n < ys.n; ++n) {
      const double* dy = self.grad.plane(n, 0);
      for (int r0 = 0; r0 < g.out_h; r0 += chunk_rows) {
        const int r1 = std::min(g.out_h, r0 + chunk_rows);
        const int ncols = (r1 - r0) * g.out_w;
        const ConstStridedMap dymap(dy + static_cast<size_t>(r0) * g.out_w,
                                    ys.c, ncols,
                                    Eigen::OuterStride<>(g.out_h * g.out_w));
        if (need_w) {
          col.resize(static_cast<size_t>(g.col_rows()) * ncols);
          Im2Col(g, xv.plane(n, 0), r0, r1, col.data());
          const Eigen::Map<const RowMat> colmat(col.data(), g.col_rows(),
                                                ncols);
          dw.noalias() += dymap * colmat.transpose();
        }
        if (need_x) {
          dcol.noalias() = wmat.transpose() * dymap;
          Col2Im(g, dcol.data(), r0, r1, dx->plane(n, 0));
        }
      }
    }
    if (need_w) {
      Tensor& gw = ParentGrad(self, 1);
      Eigen::Map<RowMat>(gw.data(), ys.c, g.col_rows()) += dw;
    }
  });
}

Var ConvTranspose2d(const Var& x, const Var& weight, const Var& bias,
                    int stride, int pad, int output_padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != xs.c || ws.h != ws.w) {
    Fail(ErrorKind::kShapeMismatch,
         "ConvTranspose2d: input " + xs.str() + " weight " + ws.str());
  }
  const int k = ws.h;
  const int cout = ws.c;
  const int out_h = (xs.h - 1) * stride - 2 * pad + k + output_padding;
  const int out_w = (xs.w - 1) * stride - 2 * pad + k + output_padding;
  // The adjoint convolution maps the output image back onto the input grid.
  const ConvGeometry g{cout, out_h, out_w, k, stride, pad, xs.h, xs.w};
  Tensor out(Shape{xs.n, cout, out_h, out_w});

  const Eigen::Map<const RowMat> wmat(weight.value().data(), xs.c,
                                      g.col_rows());
  const int chunk_rows = g.RowsPerChunk();
  RowMat col;
  for (int n = 0; n < xs.n; ++n) {
    const double* xin = x.value().plane(n, 0);
    for (int r0 = 0; r0 < xs.h; r0 += chunk_rows) {
      const int r1 = std::min(xs.h, r0 + chunk_rows);
      const int ncols = (r1 - r0) * xs.w;
      const ConstStridedMap xmap(xin + static_cast<size_t>(r0) * xs.w, xs.c,
                                 ncols, Eigen::OuterStride<>(xs.h * xs.w));
      col.noalias() = wmat.transpose() * xmap;
      Col2Im(g, col.data(), r0, r1, out.plane(n, 0));
    }
  }
  if (bias.defined()) AddBias(out, bias.value());

  std::vector<Var> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return MakeResult(std::move(out), std::move(parents), [g](Node& self) {
    const Tensor& xv = ParentValue(self, 0);
    const Tensor& wv = ParentValue(self, 1);
    const Shape xs = xv.shape();
    const bool need_x = ParentNeedsGrad(self, 0);
    const bool need_w = ParentNeedsGrad(self, 1);
    if (ParentNeedsGrad(self, 2)) AccumulateBiasGrad(self.grad, ParentGrad(self, 2));
    if (!need_x && !need_w) return;

    const Eigen::Map<const RowMat> wmat(wv.data(), xs.c, g.col_rows());
    RowMat dw;
    if (need_w) dw = RowMat::Zero(xs.c, g.col_rows());
    const int chunk_rows = g.RowsPerChunk();
    std::vector<double> col;
    for (int n = 0; n < xs.n; ++n) {
      for (int r0 = 0; r0 < xs.h; r0 += chunk_rows) {
        const int r1 = std::min(xs.h, r0 + chunk_rows);
        const int ncols = (r1 - r0) * xs.w;
        col.resize(static_cast<size_t>(g.col_rows()) * ncols);
        Im2Col(g, self.grad.plane(n, 0), r0, r1, col.data());
        const Eigen::Map<const RowMat> colmat(col.data(), g.col_rows(), ncols);
        if (need_x) {
          StridedMap dxmap(
              ParentGrad(self, 0).plane(n, 0) + static_cast<size_t>(r0) * xs.w,
              xs.c, ncols, Eigen::OuterStride<>(xs.h * xs.w));
          dxmap.noalias() += wmat * colmat;
        }
        if (need_w) {
          const ConstStridedMap xmap(
              xv.plane(n, 0) + static_cast<size_t>(r0) * xs.w, xs.c, ncols,
              Eigen::OuterStride<>(xs.h * xs.w));
          dw.noalias() += xmap * colmat.transpose();
        }
      }
    }
    if (need_w) {
      Tensor& gw = ParentGrad(self, 1);
      Eigen::Map<RowMat>(gw.data(), xs.c, g.col_rows()) += dw;
    }
  });
}

Var Linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const int in = xs.c * xs.h * xs.w;
  if (ws.c * ws.h * ws.w != in) {
    Fail(ErrorKind::kShapeMismatch,
         "Linear: input " + xs.str() + " weight " + ws.str());
  }
  Tensor out(Shape{xs.n, ws.n, 1, 1});
  const Eigen::Map<const RowMat> xm(x.value().data(), xs.n, in);
  const Eigen::Map<const RowMat> wm(weight.value().data(), ws.n, in);
  Eigen::Map<RowMat> ym(out.data(), xs.n, ws.n);
  ym.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    for (int n = 0; n < xs.n; ++n) {
      for (int o = 0; o < ws.n; ++o) ym(n, o) += bias.value()[o];
    }
  }
  std::vector<Var> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return MakeResult(std::move(out), std::move(parents), [in](Node& self) {
    const Tensor& xv = ParentValue(self, 0);
    const Tensor& wv = ParentValue(self, 1);
    const int n = xv.shape().n;
    const int out = self.value.shape().c;
    const Eigen::Map<const RowMat> dy(self.grad.data(), n, out);
    if (ParentNeedsGrad(self, 0)) {
      Eigen::Map<RowMat>(ParentGrad(self, 0).data(), n, in).noalias() +=
          dy * Eigen::Map<const RowMat>(wv.data(), out, in);
    }
    if (ParentNeedsGrad(self, 1)) {
      Eigen::Map<RowMat>(ParentGrad(self, 1).data(), out, in).noalias() +=
          dy.transpose() * Eigen::Map<const RowMat>(xv.data(), n, in);
    }
    if (ParentNeedsGrad(self, 2)) {
      Tensor& gb = ParentGrad(self, 2);
      for (int i = 0; i < n; ++i) {
        for (int o = 0; o < out; ++o) gb[o] += dy(i, o);
      }
    }
  });
}

Var AddChannelVector(const Var& x, const Var& v) {
  const Shape xs = x.shape();
  const Shape vs = v.shape();
  if (vs.c != xs.c || vs.h != 1 || vs.w != 1 || (vs.n != 1 && vs.n != xs.n)) {
    Fail(ErrorKind::kDepthMismatch, "AddChannelVector: features " +
                                        xs.str() + " vector " + vs.str());
  }
  Tensor out = x.value();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const double b = v.value()[(vs.n == 1 ? 0 : n) * xs.c + c];
      double* p = out.plane(n, c);
      for (size_t i = 0; i < xs.plane(); ++i) p[i] += b;
    }
  }
  return MakeResult(std::move(out), {x, v}, [](Node& self) {
    if (ParentNeedsGrad(self, 0)) ParentGrad(self, 0).Add(self.grad);
    if (ParentNeedsGrad(self, 1)) {
      Tensor& gv = ParentGrad(self, 1);
      const Shape s = self.value.shape();
      const bool shared = gv.shape().n == 1;
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
          const double* p = self.grad.plane(n, c);
          double acc = 0.0;
          for (size_t i = 0; i < s.plane(); ++i) acc += p[i];
          gv[(shared ? 0 : n) * s.c + c] += acc;
        }
      }
    }
  });
}

Var BroadcastChannels(const Var& v, const Shape& shape) {
  return AddChannelVector(Var::Constant(Tensor(shape)), v);
}

Var Crop(const Var& x, int top, int left, int height, int width) {
  const Shape xs = x.shape();
  if (top < 0 || left < 0 || height <= 0 || width <= 0 ||
      top + height > xs.h || left + width > xs.w) {
    Fail(ErrorKind::kCropOutOfBounds, "crop window out of bounds for " +
                                          xs.str());
  }
  Tensor out(Shape{xs.n, xs.c, height, width});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      for (int i = 0; i < height; ++i) {
        const double* src = x.value().plane(n, c) +
                            static_cast<size_t>(top + i) * xs.w + left;
        std::copy(src, src + width, out.plane(n, c) + static_cast<size_t>(i) * width);
      }
    }
  }
  return MakeResult(std::move(out), {x}, [top, left](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    const Shape s = self.value.shape();
    const int w = g.shape().w;
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        for (int i = 0; i < s.h; ++i) {
          const double* src = self.grad.plane(n, c) + static_cast<size_t>(i) * s.w;
          double* dst = g.plane(n, c) + static_cast<size_t>(top + i) * w + left;
          for (int j = 0; j < s.w; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

Var Pad(const Var& x, int top, int bottom, int left, int right, double value) {
  const Shape xs = x.shape();
  Tensor out(Shape{xs.n, xs.c, xs.h + top + bottom, xs.w + left + right},
             value);
  const int ow = out.shape().w;
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      for (int i = 0; i < xs.h; ++i) {
        const double* src = x.value().plane(n, c) + static_cast<size_t>(i) * xs.w;
        std::copy(src, src + xs.w,
                  out.plane(n, c) + static_cast<size_t>(top + i) * ow + left);
      }
    }
  }
  return MakeResult(std::move(out), {x}, [top, left](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    const Shape s = g.shape();
    const int ow = self.value.shape().w;
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        for (int i = 0; i < s.h; ++i) {
          const double* src = self.grad.plane(n, c) +
                              static_cast<size_t>(top + i) * ow + left;
          double* dst = g.plane(n, c) + static_cast<size_t>(i) * s.w;
          for (int j = 0; j < s.w; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

Var ResizeBilinear(const Var& x, int out_h, int out_w) {
  const Shape xs = x.shape();
  if (xs.h == out_h && xs.w == out_w) return x;
  RowMat ry = ResizeMatrix(xs.h, out_h);
  RowMat rx = ResizeMatrix(xs.w, out_w);
  Tensor out(Shape{xs.n, xs.c, out_h, out_w});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const Eigen::Map<const RowMat> in(x.value().plane(n, c), xs.h, xs.w);
      Eigen::Map<RowMat>(out.plane(n, c), out_h, out_w).noalias() =
          ry * in * rx.transpose();
    }
  }
  return MakeResult(std::move(out), {x},
                    [ry = std::move(ry), rx = std::move(rx)](Node& self) {
                      Tensor& g = ParentGrad(self, 0);
                      const Shape s = g.shape();
                      const Shape os = self.value.shape();
                      for (int n = 0; n < s.n; ++n) {
                        for (int c = 0; c < s.c; ++c) {
                          const Eigen::Map<const RowMat> dy(
                              self.grad.plane(n, c), os.h, os.w);
                          Eigen::Map<RowMat>(g.plane(n, c), s.h, s.w)
                              .noalias() += ry.transpose() * dy * rx;
                        }
                      }
                    });
}

Var NormalizeChannels(const Var& x, const std::array<double, 3>& mean,
                      const std::array<double, 3>& stdev) {
  const Shape xs = x.shape();
  if (xs.c != 3) {
    Fail(ErrorKind::kShapeMismatch, "NormalizeChannels expects 3 channels");
  }
  Tensor out = x.value();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < 3; ++c) {
      double* p = out.plane(n, c);
      for (size_t i = 0; i < xs.plane(); ++i) p[i] = (p[i] - mean[c]) / stdev[c];
    }
  }
  return MakeResult(std::move(out), {x}, [stdev](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    const Shape s = g.shape();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < 3; ++c) {
        const double* dy = self.grad.plane(n, c);
        double* dx = g.plane(n, c);
        for (size_t i = 0; i < s.plane(); ++i) dx[i] += dy[i] / stdev[c];
      }
    }
  });
}

Var SliceChannels(const Var& x, int begin, int end) {
  const Shape xs = x.shape();
  if (begin < 0 || end > xs.c || begin >= end) {
    Fail(ErrorKind::kShapeMismatch, "SliceChannels out of range");
  }
  Tensor out(Shape{xs.n, end - begin, xs.h, xs.w});
  for (int n = 0; n < xs.n; ++n) {
    std::copy(x.value().plane(n, begin), x.value().plane(n, begin) +
                                             (end - begin) * xs.plane(),
              out.plane(n, 0));
  }
  return MakeResult(std::move(out), {x}, [begin](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    const Shape s = self.value.shape();
    for (int n = 0; n < s.n; ++n) {
      const double* src = self.grad.plane(n, 0);
      double* dst = g.plane(n, begin);
      for (size_t i = 0; i < s.c * s.plane(); ++i) dst[i] += src[i];
    }
  });
}

Var SelectItem(const Var& x, int index) {
  const Shape xs = x.shape();
  if (index < 0 || index >= xs.n) {
    Fail(ErrorKind::kShapeMismatch, "SelectItem index out of range");
  }
  return MakeResult(x.value().Slice(index, index + 1), {x},
                    [index](Node& self) {
                      Tensor& g = ParentGrad(self, 0);
                      double* dst = g.plane(index, 0);
                      for (size_t i = 0; i < self.grad.size(); ++i) {
                        dst[i] += self.grad[i];
                      }
                    });
}

Var ConcatBatch(std::span<const Var> items) {
  std::vector<Tensor> values;
  values.reserve(items.size());
  for (const Var& v : items) values.push_back(v.value());
  Tensor out = Stack(values);
  return MakeResult(std::move(out), std::vector<Var>(items.begin(), items.end()),
                    [](Node& self) {
                      size_t offset = 0;
                      for (auto& parent : self.parents) {
                        const size_t count = parent->value.size();
                        if (parent->requires_grad) {
                          Tensor& g = parent->GradBuffer();
                          for (size_t i = 0; i < count; ++i) {
                            g[i] += self.grad[offset + i];
                          }
                        }
                        offset += count;
                      }
                    });
}

Var GlobalAvgPool(const Var& x) {
  const Shape xs = x.shape();
  Tensor out(Shape{xs.n, xs.c, 1, 1});
  const double inv = 1.0 / static_cast<double>(xs.plane());
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const double* p = x.value().plane(n, c);
      double acc = 0.0;
      for (size_t i = 0; i < xs.plane(); ++i) acc += p[i];
      out[static_cast<size_t>(n) * xs.c + c] = acc * inv;
    }
  }
  return MakeResult(std::move(out), {x}, [inv](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    const Shape s = g.shape();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double d = self.grad[static_cast<size_t>(n) * s.c + c] * inv;
        double* p = g.plane(n, c);
        for (size_t i = 0; i < s.plane(); ++i) p[i] += d;
      }
    }
  });
}

Var L2Normalize(const Var& x) {
  const Shape xs = x.shape();
  const size_t item = static_cast<size_t>(xs.c) * xs.plane();
  Tensor out = x.value();
  std::vector<double> norms(xs.n);
  for (int n = 0; n < xs.n; ++n) {
    double* p = out.data() + n * item;
    double ss = 0.0;
    for (size_t i = 0; i < item; ++i) ss += p[i] * p[i];
    norms[n] = std::sqrt(ss);
    if (norms[n] == 0.0) {
      Fail(ErrorKind::kNumeric, "L2Normalize of a zero vector");
    }
    for (size_t i = 0; i < item; ++i) p[i] /= norms[n];
  }
  return MakeResult(std::move(out), {x},
                    [item, norms = std::move(norms)](Node& self) {
                      Tensor& g = ParentGrad(self, 0);
                      for (size_t n = 0; n < norms.size(); ++n) {
                        const double* y = self.value.data() + n * item;
                        const double* dy = self.grad.data() + n * item;
                        double proj = 0.0;
                        for (size_t i = 0; i < item; ++i) proj += y[i] * dy[i];
                        double* dx = g.data() + n * item;
                        for (size_t i = 0; i < item; ++i) {
                          dx[i] += (dy[i] - y[i] * proj) / norms[n];
                        }
                      }
                    });
}

Var Dot(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Dot");
  const Shape s = a.shape();
  const size_t item = static_cast<size_t>(s.c) * s.plane();
  Tensor out(Shape{s.n, 1, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    const double* pa = a.value().data() + n * item;
    const double* pb = b.value().data() + n * item;
    double acc = 0.0;
    for (size_t i = 0; i < item; ++i) acc += pa[i] * pb[i];
    out[n] = acc;
  }
  return MakeResult(std::move(out), {a, b}, [item](Node& self) {
    for (size_t side = 0; side < 2; ++side) {
      if (!ParentNeedsGrad(self, side)) continue;
      const Tensor& other = ParentValue(self, 1 - side);
      Tensor& g = ParentGrad(self, side);
      for (size_t n = 0; n < self.value.size(); ++n) {
        for (size_t i = 0; i < item; ++i) {
          g[n * item + i] += self.grad[n] * other[n * item + i];
        }
      }
    }
  });
}

Var Sum(const Var& a) {
  Tensor out(Shape{1, 1, 1, 1}, a.value().Sum());
  return MakeResult(std::move(out), {a}, [](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    const double d = self.grad[0];
    for (size_t i = 0; i < g.size(); ++i) g[i] += d;
  });
}

Var Mean(const Var& a) {
  return Scale(Sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var MeanSquaredError(const Var& a, const Var& b) {
  RequireSameShape(a, b, "MeanSquaredError");
  const size_t count = a.value().size();
  double acc = 0.0;
  for (size_t i = 0; i < count; ++i) {
    const double d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  Tensor out(Shape{1, 1, 1, 1}, acc / static_cast<double>(count));
  return MakeResult(std::move(out), {a, b}, [count](Node& self) {
    const Tensor& av = ParentValue(self, 0);
    const Tensor& bv = ParentValue(self, 1);
    const double k = 2.0 * self.grad[0] / static_cast<double>(count);
    if (ParentNeedsGrad(self, 0)) {
      Tensor& g = ParentGrad(self, 0);
      for (size_t i = 0; i < count; ++i) g[i] += k * (av[i] - bv[i]);
    }
    if (ParentNeedsGrad(self, 1)) {
      Tensor& g = ParentGrad(self, 1);
      for (size_t i = 0; i < count; ++i) g[i] -= k * (av[i] - bv[i]);
    }
  });
}

Var GaussianLikelihood(const Var& values, const Var& means, const Var& scales,
                       double scale_floor) {
  RequireSameShape(values, means, "GaussianLikelihood");
  RequireSameShape(values, scales, "GaussianLikelihood");
  const size_t count = values.value().size();
  Tensor out(values.shape());
  for (size_t i = 0; i < count; ++i) {
    const double v = std::abs(values.value()[i] - means.value()[i]);
    const double s = std::max(scales.value()[i], scale_floor);
    // Evaluated on the left tail to avoid cancellation.
    out[i] = NormalCdf((0.5 - v) / s) - NormalCdf((-0.5 - v) / s);
  }
  return MakeResult(
      std::move(out), {values, means, scales}, [scale_floor](Node& self) {
        const Tensor& yv = ParentValue(self, 0);
        const Tensor& mv = ParentValue(self, 1);
        const Tensor& sv = ParentValue(self, 2);
        Tensor* gy = ParentNeedsGrad(self, 0) ? &ParentGrad(self, 0) : nullptr;
        Tensor* gm = ParentNeedsGrad(self, 1) ? &ParentGrad(self, 1) : nullptr;
        Tensor* gs = ParentNeedsGrad(self, 2) ? &ParentGrad(self, 2) : nullptr;
        for (size_t i = 0; i < self.value.size(); ++i) {
          const double diff = yv[i] - mv[i];
          const double v = std::abs(diff);
          const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          const double s = std::max(sv[i], scale_floor);
          const double a = (0.5 - v) / s;
          const double b = (-0.5 - v) / s;
          const double pa = NormalPdf(a);
          const double pb = NormalPdf(b);
          const double d_v = (pb - pa) / s * self.grad[i];
          if (gy) (*gy)[i] += d_v * sign;
          if (gm) (*gm)[i] -= d_v * sign;
          if (gs && sv[i] >= scale_floor) {
            (*gs)[i] += (b * pb - a * pa) / s * self.grad[i];
          }
        }
      });
}

Var TotalBits(const Var& likelihood, double floor) {
  const Tensor& lik = likelihood.value();
  double bits = 0.0;
  for (size_t i = 0; i < lik.size(); ++i) {
    if (std::isnan(lik[i])) {
      Fail(ErrorKind::kNumeric, "likelihood is NaN at element " +
                                    std::to_string(i));
    }
    bits -= std::log2(std::max(lik[i], floor));
  }
  if (!std::isfinite(bits)) {
    Fail(ErrorKind::kNumeric, "rate estimate is not finite");
  }
  return MakeResult(Tensor(Shape{1, 1, 1, 1}, bits), {likelihood},
                    [floor](Node& self) {
                      const Tensor& l = ParentValue(self, 0);
                      Tensor& g = ParentGrad(self, 0);
                      const double k = -self.grad[0] / std::numbers::ln2;
                      for (size_t i = 0; i < l.size(); ++i) {
                        if (l[i] > floor) g[i] += k / l[i];
                      }
                    });
}

}  // namespace ugicm
