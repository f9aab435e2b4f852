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

#include "ugicm/vit.h"

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>

#include "ugicm/errors.h"
#include "ugicm/ops.h"

namespace ugicm {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using ConstMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

Tensor& ParentGrad(Node& node, size_t i) { return node.parents[i]->GradBuffer(); }
const Tensor& ParentValue(const Node& node, size_t i) { return node.parents[i]->value; }
bool ParentNeedsGrad(const Node& node, size_t i) {
  return i < node.parents.size() && node.parents[i] != nullptr &&
         node.parents[i]->requires_grad;
}

void RequireTokens(const Var& x, const char* op) {
  if (x.shape().c != 1) {
    Fail(ErrorKind::kShapeMismatch, std::string(op) + " expects tokens, got " +
                                        x.shape().str());
  }
}

double* Item(Tensor& t, int n) { return t.plane(n, 0); }
const double* Item(const Tensor& t, int n) { return t.plane(n, 0); }

}  // namespace

Var FeatureMapToTokens(const Var& x) {
  const Shape s = x.shape();
  const int t = s.h * s.w;
  Tensor out(Shape{s.n, 1, t, s.c});
  for (int n = 0; n < s.n; ++n) {
    Map(Item(out, n), t, s.c) = ConstMap(x.value().plane(n, 0), s.c, t).transpose();
  }
  return MakeResult(std::move(out), {x}, [s, t](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    for (int n = 0; n < s.n; ++n) {
      Map(g.plane(n, 0), s.c, t) += ConstMap(Item(self.grad, n), t, s.c).transpose();
    }
  });
}

Var PrependRow(const Var& tokens, const Var& row) {
  RequireTokens(tokens, "PrependRow");
  const Shape s = tokens.shape();
  if (row.shape() != Shape{1, 1, 1, s.w}) {
    Fail(ErrorKind::kShapeMismatch, "PrependRow row " + row.shape().str());
  }
  Tensor out(Shape{s.n, 1, s.h + 1, s.w});
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(row.value().data(), s.w, Item(out, n));
    std::copy_n(Item(tokens.value(), n), s.h * s.w, Item(out, n) + s.w);
  }
  return MakeResult(std::move(out), {tokens, row}, [s](Node& self) {
    const size_t body = static_cast<size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
      const double* g = Item(self.grad, n);
      if (ParentNeedsGrad(self, 0)) {
        double* gt = Item(ParentGrad(self, 0), n);
        for (size_t i = 0; i < body; ++i) gt[i] += g[s.w + i];
      }
      if (ParentNeedsGrad(self, 1)) {
        double* gr = ParentGrad(self, 1).data();
        for (int i = 0; i < s.w; ++i) gr[i] += g[i];
      }
    }
  });
}

Var AddRows(const Var& tokens, const Var& table) {
  RequireTokens(tokens, "AddRows");
  const Shape s = tokens.shape();
  if (table.shape() != Shape{1, 1, s.h, s.w}) {
    Fail(ErrorKind::kShapeMismatch, "AddRows table " + table.shape().str() +
                                        " for tokens " + s.str());
  }
  Tensor out = tokens.value();
  const size_t per = static_cast<size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    double* p = Item(out, n);
    for (size_t i = 0; i < per; ++i) p[i] += table.value()[i];
  }
  return MakeResult(std::move(out), {tokens, table}, [s, per](Node& self) {
    if (ParentNeedsGrad(self, 0)) ParentGrad(self, 0).Add(self.grad);
    if (ParentNeedsGrad(self, 1)) {
      Tensor& g = ParentGrad(self, 1);
      for (int n = 0; n < s.n; ++n) {
        const double* p = Item(self.grad, n);
        for (size_t i = 0; i < per; ++i) g[i] += p[i];
      }
    }
  });
}

Var LayerNormRows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  RequireTokens(x, "LayerNormRows");
  const Shape s = x.shape();
  const int rows = s.n * s.h, d = s.w;
  ConstMap xv(x.value().data(), rows, d);
  Eigen::VectorXd inv_std(rows);
  RowMat normalized(rows, d);
  for (int r = 0; r < rows; ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (xv.row(r).array() - mean) * inv_std[r];
  }
  Tensor out(s);
  Eigen::Map<const Eigen::RowVectorXd> g(gamma.value().data(), d);
  Eigen::Map<const Eigen::RowVectorXd> b(beta.value().data(), d);
  Map(out.data(), rows, d) = (normalized.array().rowwise() * g.array()).rowwise() + b.array();
  return MakeResult(
      std::move(out), {x, gamma, beta},
      [rows, d, inv_std = std::move(inv_std), normalized = std::move(normalized)](Node& self) {
        ConstMap dy(self.grad.data(), rows, d);
        if (ParentNeedsGrad(self, 1)) {
          Eigen::Map<Eigen::RowVectorXd>(ParentGrad(self, 1).data(), d) +=
              (dy.array() * normalized.array()).colwise().sum().matrix();
        }
        if (ParentNeedsGrad(self, 2)) {
          Eigen::Map<Eigen::RowVectorXd>(ParentGrad(self, 2).data(), d) += dy.colwise().sum();
        }
        if (ParentNeedsGrad(self, 0)) {
          Eigen::Map<const Eigen::RowVectorXd> g(ParentValue(self, 1).data(), d);
          const RowMat dn = dy.array().rowwise() * g.array();
          Map dx(ParentGrad(self, 0).data(), rows, d);
          for (int r = 0; r < rows; ++r) {
            const double m1 = dn.row(r).mean();
            const double m2 = (dn.row(r).array() * normalized.row(r).array()).mean();
            dx.row(r).array() +=
                inv_std[r] * (dn.row(r).array() - m1 - normalized.row(r).array() * m2);
          }
        }
      });
}

Var LinearRows(const Var& x, const Var& weight, const Var& bias) {
  RequireTokens(x, "LinearRows");
  const Shape s = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != 1 || ws.c != 1 || ws.w != s.w) {
    Fail(ErrorKind::kShapeMismatch, "LinearRows weight " + ws.str() + " for " + s.str());
  }
  const int rows = s.n * s.h, in = s.w, outd = ws.h;
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{1, 1, 1, outd}) {
    Fail(ErrorKind::kShapeMismatch, "LinearRows bias " + bias.shape().str());
  }
  Tensor out(Shape{s.n, 1, s.h, outd});
  Map y(out.data(), rows, outd);
  y.noalias() = ConstMap(x.value().data(), rows, in) *
                ConstMap(weight.value().data(), outd, in).transpose();
  if (has_bias) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().data(), outd);
  }
  std::vector<Var> parents = {x, weight};
  if (has_bias) parents.push_back(bias);
  return MakeResult(std::move(out), parents, [rows, in, outd](Node& self) {
    ConstMap dy(self.grad.data(), rows, outd);
    if (ParentNeedsGrad(self, 0)) {
      Map(ParentGrad(self, 0).data(), rows, in).noalias() +=
          dy * ConstMap(ParentValue(self, 1).data(), outd, in);
    }
    if (ParentNeedsGrad(self, 1)) {
      Map(ParentGrad(self, 1).data(), outd, in).noalias() +=
          dy.transpose() * ConstMap(ParentValue(self, 0).data(), rows, in);
    }
    if (ParentNeedsGrad(self, 2)) {
      Eigen::Map<Eigen::RowVectorXd>(ParentGrad(self, 2).data(), outd) += dy.colwise().sum();
    }
  });
}

Var MultiHeadAttention(const Var& qkv, int heads) {
  RequireTokens(qkv, "MultiHeadAttention");
  const Shape s = qkv.shape();
  if (heads <= 0 || s.w % (3 * heads) != 0) {
    Fail(ErrorKind::kShapeMismatch, "attention width " + std::to_string(s.w) +
                                        " not divisible into " + std::to_string(heads) +
                                        " heads");
  }
  const int t = s.h, d = s.w / 3, dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor out(Shape{s.n, 1, t, d});
  std::vector<RowMat> probs(static_cast<size_t>(s.n) * heads);
  for (int n = 0; n < s.n; ++n) {
    const double* base = Item(qkv.value(), n);
    for (int h = 0; h < heads; ++h) {
      ConstStridedMap q(base + h * dh, t, dh, Eigen::OuterStride<>(3 * d));
      ConstStridedMap k(base + d + h * dh, t, dh, Eigen::OuterStride<>(3 * d));
      ConstStridedMap v(base + 2 * d + h * dh, t, dh, Eigen::OuterStride<>(3 * d));
      RowMat p = (q * k.transpose()) * scale;
      for (int r = 0; r < t; ++r) {
        p.row(r).array() -= p.row(r).maxCoeff();
        p.row(r) = p.row(r).array().exp().matrix();
        p.row(r) /= p.row(r).sum();
      }
      StridedMap(Item(out, n) + h * dh, t, dh, Eigen::OuterStride<>(d)).noalias() = p * v;
      probs[static_cast<size_t>(n) * heads + h] = std::move(p);
    }
  }
  return MakeResult(
      std::move(out), {qkv}, [s, heads, t, d, dh, scale, probs = std::move(probs)](Node& self) {
        Tensor& g = ParentGrad(self, 0);
        for (int n = 0; n < s.n; ++n) {
          const double* base = Item(ParentValue(self, 0), n);
          double* gbase = Item(g, n);
          for (int h = 0; h < heads; ++h) {
            const RowMat& p = probs[static_cast<size_t>(n) * heads + h];
            const Eigen::OuterStride<> stride(3 * d);
            ConstStridedMap q(base + h * dh, t, dh, stride);
            ConstStridedMap k(base + d + h * dh, t, dh, stride);
            ConstStridedMap v(base + 2 * d + h * dh, t, dh, stride);
            ConstStridedMap dout(Item(self.grad, n) + h * dh, t, dh, Eigen::OuterStride<>(d));
            const RowMat dp = dout * v.transpose();
            RowMat ds = p.array() *
                        (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
            ds *= scale;
            StridedMap(gbase + h * dh, t, dh, stride).noalias() += ds * k;
            StridedMap(gbase + d + h * dh, t, dh, stride).noalias() += ds.transpose() * q;
            StridedMap(gbase + 2 * d + h * dh, t, dh, stride).noalias() += p.transpose() * dout;
          }
        }
      });
}

Var QuickGelu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v / (1.0 + std::exp(-1.702 * v));
  return MakeResult(std::move(out), {x}, [](Node& self) {
    const Tensor& xv = ParentValue(self, 0);
    Tensor& g = ParentGrad(self, 0);
    for (size_t i = 0; i < g.size(); ++i) {
      const double sig = 1.0 / (1.0 + std::exp(-1.702 * xv[i]));
      g[i] += self.grad[i] * (sig + 1.702 * xv[i] * sig * (1.0 - sig));
    }
  });
}

Var SelectRow(const Var& x, int row) {
  RequireTokens(x, "SelectRow");
  const Shape s = x.shape();
  if (row < 0 || row >= s.h) Fail(ErrorKind::kShapeMismatch, "SelectRow out of range");
  Tensor out(Shape{s.n, s.w, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(Item(x.value(), n) + static_cast<size_t>(row) * s.w, s.w,
                out.data() + static_cast<size_t>(n) * s.w);
  }
  return MakeResult(std::move(out), {x}, [s, row](Node& self) {
    Tensor& g = ParentGrad(self, 0);
    for (int n = 0; n < s.n; ++n) {
      double* dst = Item(g, n) + static_cast<size_t>(row) * s.w;
      const double* src = self.grad.data() + static_cast<size_t>(n) * s.w;
      for (int i = 0; i < s.w; ++i) dst[i] += src[i];
    }
  });
}

std::vector<std::pair<std::string, Shape>> VisionTransformer::ExpectedTensors(
    const VitConfig& c) {
  const int grid = c.resolution / c.patch;
  std::vector<std::pair<std::string, Shape>> names = {
      {"visual.conv1.weight", Shape{c.width, 3, c.patch, c.patch}},
      {"visual.class_embedding", Shape{1, 1, 1, c.width}},
      {"visual.positional_embedding", Shape{1, 1, grid * grid + 1, c.width}},
      {"visual.ln_pre.weight", Shape{1, 1, 1, c.width}},
      {"visual.ln_pre.bias", Shape{1, 1, 1, c.width}},
      {"visual.ln_post.weight", Shape{1, 1, 1, c.width}},
      {"visual.ln_post.bias", Shape{1, 1, 1, c.width}},
      {"visual.proj", Shape{1, 1, c.width, c.output_dim}},
  };
  for (int i = 0; i < c.layers; ++i) {
    const std::string p = "visual.transformer.resblocks." + std::to_string(i) + ".";
    names.push_back({p + "ln_1.weight", Shape{1, 1, 1, c.width}});
    names.push_back({p + "ln_1.bias", Shape{1, 1, 1, c.width}});
    names.push_back({p + "attn.in_proj_weight", Shape{1, 1, 3 * c.width, c.width}});
    names.push_back({p + "attn.in_proj_bias", Shape{1, 1, 1, 3 * c.width}});
    names.push_back({p + "attn.out_proj.weight", Shape{1, 1, c.width, c.width}});
    names.push_back({p + "attn.out_proj.bias", Shape{1, 1, 1, c.width}});
    names.push_back({p + "ln_2.weight", Shape{1, 1, 1, c.width}});
    names.push_back({p + "ln_2.bias", Shape{1, 1, 1, c.width}});
    names.push_back({p + "mlp.c_fc.weight", Shape{1, 1, 4 * c.width, c.width}});
    names.push_back({p + "mlp.c_fc.bias", Shape{1, 1, 1, 4 * c.width}});
    names.push_back({p + "mlp.c_proj.weight", Shape{1, 1, c.width, 4 * c.width}});
    names.push_back({p + "mlp.c_proj.bias", Shape{1, 1, 1, c.width}});
  }
  return names;
}

VisionTransformer::VisionTransformer(const VitConfig& config, TensorArchive weights)
    : EmbeddingModel(PreprocessSpec{.resolution = config.resolution}),
      config_(config),
      weights_(std::move(weights)) {
  if (config.patch <= 0 || config.resolution % config.patch != 0 || config.heads <= 0 ||
      config.width % config.heads != 0) {
    Fail(ErrorKind::kInvalidConfig, "inconsistent vision transformer configuration");
  }
  for (const auto& [name, shape] : ExpectedTensors(config)) {
    const Tensor& t = weights_.Get(name);
    if (t.shape() != shape) {
      Fail(ErrorKind::kShapeMismatch, name + " is " + t.shape().str() + ", expected " +
                                          shape.str());
    }
  }
}

Var VisionTransformer::W(const std::string& name) const {
  return Var::Constant(weights_.Get(name));
}

Var VisionTransformer::Features(const Var& preprocessed) const {
  Var x = Conv2d(preprocessed, W("visual.conv1.weight"), Var(), config_.patch, 0);
  x = FeatureMapToTokens(x);
  x = PrependRow(x, W("visual.class_embedding"));
  x = AddRows(x, W("visual.positional_embedding"));
  x = LayerNormRows(x, W("visual.ln_pre.weight"), W("visual.ln_pre.bias"));
  for (int i = 0; i < config_.layers; ++i) {
    const std::string p = "visual.transformer.resblocks." + std::to_string(i) + ".";
    Var h = LayerNormRows(x, W(p + "ln_1.weight"), W(p + "ln_1.bias"));
    h = LinearRows(h, W(p + "attn.in_proj_weight"), W(p + "attn.in_proj_bias"));
    h = MultiHeadAttention(h, config_.heads);
    h = LinearRows(h, W(p + "attn.out_proj.weight"), W(p + "attn.out_proj.bias"));
    x = Add(x, h);
    h = LayerNormRows(x, W(p + "ln_2.weight"), W(p + "ln_2.bias"));
    h = QuickGelu(LinearRows(h, W(p + "mlp.c_fc.weight"), W(p + "mlp.c_fc.bias")));
    h = LinearRows(h, W(p + "mlp.c_proj.weight"), W(p + "mlp.c_proj.bias"));
    x = Add(x, h);
  }
  x = LayerNormRows(x, W("visual.ln_post.weight"), W("visual.ln_post.bias"));
  // Class token (n, 1, 1, width) times proj (width, out).
  const Var cls = SelectRow(x, 0);
  const Shape cs = cls.shape();
  const Var tokens = Reshape(cls, Shape{cs.n, 1, 1, cs.c});
  const Tensor& proj = weights_.Get("visual.proj");
  Tensor proj_t(Shape{1, 1, config_.output_dim, config_.width});
  Map(proj_t.data(), config_.output_dim, config_.width) =
      ConstMap(proj.data(), config_.width, config_.output_dim).transpose();
  const Var y = LinearRows(tokens, Var::Constant(proj_t), Var());
  return Reshape(y, Shape{cs.n, config_.output_dim, 1, 1});
}

std::unique_ptr<VisionTransformer> LoadVisionTransformer(const std::string& path) {
  TensorArchive archive = ReadArchive(path);
  VitConfig c;
  try {
    const auto meta = nlohmann::json::parse(archive.metadata);
    c.resolution = meta.value("resolution", c.resolution);
    c.patch = meta.value("patch", c.patch);
    c.width = meta.value("width", c.width);
    c.layers = meta.value("layers", c.layers);
    c.heads = meta.value("heads", c.heads);
    c.output_dim = meta.value("output_dim", c.output_dim);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidConfig, std::string("bad weights metadata: ") + e.what());
  }
  return std::make_unique<VisionTransformer>(c, std::move(archive));
}

}  // namespace ugicm
