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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.h"
#include "ugicm/image_io.h"

namespace ugicm {
namespace {

using testing::RandomTensor;
using testing::ThrownKind;

Tensor Wave(int h, int w, double amp, double fi, double fj, double phase, double ripple) {
  Tensor x(Shape{1, 3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        x.at(0, c, i, j) = 0.5 + amp * std::sin(fi * i + fj * j + c + phase) +
                           ripple * std::cos(1.3 * i);
  return x;
}

TEST(Psnr, Examples) {
  const Tensor x = RandomTensor(Shape{1, 3, 16, 16}, 1, 0, 1);
  EXPECT_EQ(Psnr(x, x), kPsnrCap);
  EXPECT_EQ(Psnr(Tensor(Shape{1, 3, 8, 8}, 0.0), Tensor(Shape{1, 3, 8, 8}, 1.0)), 0.0);
  const Tensor y = RandomTensor(Shape{1, 3, 16, 16}, 2, 0, 1);
  EXPECT_EQ(Psnr(x, y), Psnr(y, x));
  EXPECT_NEAR(Psnr(Tensor(Shape{1, 1, 1, 4}, 0.5), Tensor(Shape{1, 1, 1, 4}, 0.6)), 20.0, 1e-12);
  EXPECT_EQ(ThrownKind([&] { Psnr(x, Tensor(Shape{1, 3, 16, 15})); }),
            ErrorKind::kShapeMismatch);
}

TEST(Ssim, Examples) {
  const Tensor x = RandomTensor(Shape{1, 3, 20, 24}, 3, 0, 1);
  const Tensor y = RandomTensor(Shape{1, 3, 20, 24}, 4, 0, 1);
  EXPECT_NEAR(Ssim(x, x), 1.0, 1e-12);
  EXPECT_EQ(Ssim(x, y), Ssim(y, x));
  EXPECT_EQ(ThrownKind([&] { Ssim(Tensor(Shape{1, 3, 10, 30}), Tensor(Shape{1, 3, 10, 30})); }),
            ErrorKind::kDimensionMismatch);
}

// Reference values from skimage.metrics.structural_similarity(data_range=1,
// gaussian_weights=True, sigma=1.5, use_sample_covariance=False, channel_axis=2).
TEST(Ssim, MatchesReferenceImplementation) {
  EXPECT_NEAR(Ssim(Tensor(Shape{1, 3, 24, 24}, 0.2), Tensor(Shape{1, 3, 24, 24}, 0.7)),
              0.5283908696472038, 1e-12);
  EXPECT_NEAR(Ssim(Wave(32, 40, 0.4, 0.3, 0.7, 0.0, 0.0), Wave(32, 40, 0.3, 0.31, 0.69, 0.2, 0.05)),
              0.9230034449585879, 1e-12);
}

TEST(Png, RoundTrip) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ugicm_metrics_test.png").string();
  const Tensor x = QuantizeTo8Bit(RandomTensor(Shape{1, 3, 13, 21}, 5, 0, 1));
  WritePng(path, x);
  const Tensor back = ReadPng(path);
  ASSERT_EQ(back.shape(), x.shape());
  for (size_t i = 0; i < x.size(); ++i) EXPECT_EQ(back[i], x[i]);
  std::filesystem::remove(path);
  EXPECT_EQ(ThrownKind([&] { ReadPng(path); }), ErrorKind::kIo);
}

}  // namespace
}  // namespace ugicm
