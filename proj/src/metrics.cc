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

#include "ugicm/metrics.h"

#include <array>
#include <cmath>
#include <vector>

#include "ugicm/errors.h"

namespace ugicm {
namespace {

constexpr int kRadius = 5;
constexpr int kWindow = 2 * kRadius + 1;

void RequireSameShape(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    Fail(ErrorKind::kShapeMismatch, x.shape().str() + " vs " + y.shape().str());
  }
}

std::array<double, kWindow> GaussianWindow() {
  std::array<double, kWindow> w;
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kRadius;
    w[i] = std::exp(-0.5 * d * d / (1.5 * 1.5));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> Filter(const std::vector<double>& in, int h, int w,
                           const std::array<double, kWindow>& k) {
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<size_t>(h) * ow);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += k[t] * in[i * w + j + t];
      rows[i * ow + j] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += k[t] * rows[(i + t) * ow + j];
      out[i * ow + j] = acc;
    }
  }
  return out;
}

}  // namespace

double Psnr(const Tensor& x, const Tensor& y) {
  RequireSameShape(x, y);
  double sq = 0.0;
  for (size_t i = 0; i < x.size(); ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = sq / static_cast<double>(x.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double Ssim(const Tensor& x, const Tensor& y) {
  RequireSameShape(x, y);
  const Shape s = x.shape();
  if (s.n != 1) Fail(ErrorKind::kShapeMismatch, "SSIM takes one image pair");
  if (s.h < kWindow || s.w < kWindow) {
    Fail(ErrorKind::kDimensionMismatch, "image " + s.str() + " smaller than the " +
                                            std::to_string(kWindow) + "x" +
                                            std::to_string(kWindow) + " window");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto k = GaussianWindow();
  const size_t plane = s.plane();
  double total = 0.0;
  size_t count = 0;
  for (int c = 0; c < s.c; ++c) {
    const double* a = x.plane(0, c);
    const double* b = y.plane(0, c);
    std::vector<double> va(a, a + plane), vb(b, b + plane), aa(plane), bb(plane), ab(plane);
    for (size_t i = 0; i < plane; ++i) {
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    const auto mu_a = Filter(va, s.h, s.w, k), mu_b = Filter(vb, s.h, s.w, k);
    const auto e_aa = Filter(aa, s.h, s.w, k), e_bb = Filter(bb, s.h, s.w, k);
    const auto e_ab = Filter(ab, s.h, s.w, k);
    for (size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      total += ((2 * (mu_a[i] * mu_b[i]) + c1) * (2 * cov + c2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
    }
    count += mu_a.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace ugicm
