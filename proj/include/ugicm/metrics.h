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

#ifndef UGICM_METRICS_H_
#define UGICM_METRICS_H_

#include "ugicm/tensor.h"

namespace ugicm {

inline constexpr double kPsnrCap = 100.0;
inline constexpr int kSsimWindow = 11;

// 10 log10(1 / MSE) for signals in [0, 1]; kPsnrCap when MSE < 1e-10.
double Psnr(const Tensor& x, const Tensor& y);

// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over all valid window
// positions and channels of a (1, c, h, w) pair. Throws kDimensionMismatch
// when the image is smaller than the window.
double Ssim(const Tensor& x, const Tensor& y);

}  // namespace ugicm

#endif  // UGICM_METRICS_H_
