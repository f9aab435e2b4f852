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

#ifndef UGICM_OPS_H_
#define UGICM_OPS_H_

#include <array>
#include <span>
#include <vector>

#include "ugicm/autograd.h"

namespace ugicm {

// Element-wise arithmetic; shapes must match exactly.
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double s);
Var AddScalar(const Var& a, double s);
// a + c for a constant tensor c (e.g. quantization noise).
Var AddConstant(const Var& a, const Tensor& c);

Var LeakyRelu(const Var& a, double slope);
Var Softplus(const Var& a);
Var Tanh(const Var& a);
// max(a, floor); the gradient is zero where the floor is active.
Var LowerBound(const Var& a, double floor);
// Clamp to [lo, hi]; zero gradient outside.
Var Clamp(const Var& a, double lo, double hi);

// Convolution, weights (cout, cin, k, k), bias (1, cout, 1, 1) or undefined.
Var Conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int pad);
// Transposed convolution, weights (cin, cout, k, k).
Var ConvTranspose2d(const Var& x, const Var& weight, const Var& bias,
                    int stride, int pad, int output_padding);
// x (n, in, 1, 1), weight (out, in, 1, 1), bias (1, out, 1, 1).
Var Linear(const Var& x, const Var& weight, const Var& bias);

// x (n, c, h, w) + v broadcast from (1, c, 1, 1) or (n, c, 1, 1).
Var AddChannelVector(const Var& x, const Var& v);
// Broadcasts (1, c, 1, 1) to `shape`.
Var BroadcastChannels(const Var& v, const Shape& shape);

// Same values under a new shape with the same element count.
Var Reshape(const Var& a, const Shape& shape);
Var Crop(const Var& x, int top, int left, int height, int width);
Var Pad(const Var& x, int top, int bottom, int left, int right, double value);
// Bilinear resampling with half-pixel centers and no antialiasing.
Var ResizeBilinear(const Var& x, int out_h, int out_w);
// (x - mean[c]) / stdev[c] over three channels.
Var NormalizeChannels(const Var& x, const std::array<double, 3>& mean,
                      const std::array<double, 3>& stdev);
Var SliceChannels(const Var& x, int begin, int end);
Var SelectItem(const Var& x, int index);
Var ConcatBatch(std::span<const Var> items);

// (n, c, h, w) -> (n, c, 1, 1).
Var GlobalAvgPool(const Var& x);
// Per batch item L2 normalization over c*h*w.
Var L2Normalize(const Var& x);
// Per batch item dot product -> (n, 1, 1, 1).
Var Dot(const Var& a, const Var& b);

// Scalar reductions, shape (1, 1, 1, 1).
Var Sum(const Var& a);
Var Mean(const Var& a);
Var MeanSquaredError(const Var& a, const Var& b);

// Probability mass of the unit bin centred on `values` under
// N(means, max(scales, scale_floor)^2).
Var GaussianLikelihood(const Var& values, const Var& means, const Var& scales,
                       double scale_floor);
// Sum of -log2(max(likelihood, floor)). Throws kNumeric on NaN likelihoods.
Var TotalBits(const Var& likelihood, double floor);

}  // namespace ugicm

#endif  // UGICM_OPS_H_
