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

#include "ugicm/clip_loss.h"

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.h"
#include "ugicm/embedding.h"
#include "ugicm/instances.h"
#include "ugicm/ops.h"

namespace ugicm {
namespace {

using testing::MaxRelativeGradError;
using testing::RandomTensor;
using testing::ThrownKind;

// Same closed form as tests/oracles/tiny_clip_oracle.py.
Tensor WaveImage(int h, int w) {
  Tensor x(Shape{1, 3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) x.at(0, c, i, j) = 0.5 + 0.4 * std::sin(0.3 * i + 0.7 * j + c);
  return x;
}

Tensor WithSquares(Tensor x, const std::vector<std::array<int, 3>>& squares, double value) {
  for (const auto& [top, left, side] : squares)
    for (int c = 0; c < 3; ++c)
      for (int i = top; i < top + side; ++i)
        for (int j = left; j < left + side; ++j) x.at(0, c, i, j) = value;
  return x;
}

Tensor Noisy(const Tensor& x, double amplitude, uint64_t seed) {
  Rng rng(seed);
  Tensor out = x;
  for (double& v : out.values()) v += rng.Uniform(-amplitude, amplitude);
  return out;
}

double Scalar(const Var& v) { return v.value()[0]; }

class ClipTest : public ::testing::Test {
 protected:
  TinyBackbone model_;
};

TEST_F(ClipTest, EmbeddingIsUnitNormAndDeterministic) {
  for (auto [h, w] : {std::pair{32, 32}, {17, 45}, {96, 96}}) {
    const Tensor x = RandomTensor(Shape{2, 3, h, w}, h * w, 0, 1);
    const Tensor e = model_.Embed(Var::Constant(x)).value();
    ASSERT_EQ(e.shape(), (Shape{2, 64, 1, 1}));
    for (int n = 0; n < 2; ++n) {
      double sq = 0;
      for (int i = 0; i < 64; ++i) sq += e[n * 64 + i] * e[n * 64 + i];
      EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
    }
    EXPECT_EQ(model_.Embed(Var::Constant(x)).value().vec(), e.vec());
  }
}

TEST_F(ClipTest, EmbeddingMatchesIndependentReference) {
  const Tensor e = model_.Embed(Var::Constant(WaveImage(40, 48))).value();
  EXPECT_NEAR(e[0], 0.10888769149275031, 1e-10);
  EXPECT_NEAR(e[1], -0.045532666752783613, 1e-10);
  EXPECT_NEAR(e[2], -0.097918947320071975, 1e-10);
}

TEST_F(ClipTest, EmbeddingGradientMatchesFiniteDifferences) {
  const Tensor probe = RandomTensor(Shape{1, 64, 1, 1}, 3, -1, 1);
  auto f = [&](const Var& x) { return Sum(Mul(model_.Embed(x), Var::Constant(probe))); };
  EXPECT_LT(MaxRelativeGradError(f, RandomTensor(Shape{1, 3, 24, 24}, 4, 0, 1)), 1e-3);
  EXPECT_LT(MaxRelativeGradError(f, RandomTensor(Shape{1, 3, 40, 40}, 5, 0, 1), 1e-6, 400),
            1e-3);
}

TEST_F(ClipTest, CosineSimilarityExamples) {
  const Var v = model_.Embed(Var::Constant(WaveImage(32, 32)));
  EXPECT_NEAR(Scalar(CosineSimilarity(v, v)), 1.0, 1e-12);
  EXPECT_NEAR(Scalar(CosineSimilarity(v, Scale(v, -1.0))), -1.0, 1e-12);
  Tensor e1(Shape{1, 64, 1, 1}), e2(Shape{1, 64, 1, 1});
  e1[0] = 1.0;
  e2[1] = 1.0;
  EXPECT_EQ(Scalar(CosineSimilarity(Var::Constant(e1), Var::Constant(e2))), 0.0);
  const Var u = model_.Embed(Var::Constant(Noisy(WaveImage(32, 32), 0.3, 1)));
  EXPECT_EQ(Scalar(CosineSimilarity(u, v)), Scalar(CosineSimilarity(v, u)));
}

TEST_F(ClipTest, GlobalLossGoldenValue) {
  const Tensor x = WaveImage(40, 48);
  const Tensor xhat = Noisy(x, 0.1, 5);
  const double loss = Scalar(LossGlobal(Var::Constant(x), Var::Constant(xhat), model_));
  EXPECT_GT(loss, 0.0);
  EXPECT_NEAR(loss, 0.035436187368642624, 1e-10);
  EXPECT_LE(Scalar(LossGlobal(Var::Constant(x), Var::Constant(x), model_)), 1e-6);
}

TEST_F(ClipTest, LocalLossReductions) {
  const Tensor x = WaveImage(48, 40);
  const Tensor xhat = Noisy(x, 0.2, 9);
  const Var vx = Var::Constant(x), vh = Var::Constant(xhat);
  EXPECT_LE(std::abs(Scalar(LossLocal(vx, vx, CropSpec{5, 3, 20, 11}, model_))), 1e-6);
  EXPECT_NEAR(Scalar(LossLocal(vx, vh, CropSpec{0, 0, 48, 40}, model_)),
              Scalar(LossGlobal(vx, vh, model_)), 1e-6);

  Rng a(17), b(17);
  const CropSpec ca = RandomCrop(48, 40, 0.2, 0.5, a);
  const CropSpec cb = RandomCrop(48, 40, 0.2, 0.5, b);
  EXPECT_EQ(Scalar(LossLocal(vx, vh, ca, model_)), Scalar(LossLocal(vx, vh, cb, model_)));
  EXPECT_GE(ca.height, 10);
  EXPECT_LE(ca.height, 24);

  EXPECT_EQ(ThrownKind([&] { LossLocal(vx, vh, CropSpec{40, 0, 10, 10}, model_); }),
            ErrorKind::kCropOutOfBounds);
}

TEST_F(ClipTest, RandomCropsStayInside) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const CropSpec c = RandomCrop(96, 70, 0.2, 0.5, rng);
    EXPECT_GE(c.top, 0);
    EXPECT_GE(c.left, 0);
    EXPECT_LE(c.top + c.height, 96);
    EXPECT_LE(c.left + c.width, 70);
    EXPECT_GE(c.height, 19);
    EXPECT_LE(c.height, 48);
  }
}

TEST(Proposals, ConstantImageHasNoInstances) {
  EXPECT_TRUE(ProposeInstances(Tensor(Shape{1, 3, 64, 64}, 0.3)).empty());
}

TEST(Proposals, TwoSquares) {
  const Tensor x = WithSquares(Tensor(Shape{1, 3, 64, 64}, 0.1),
                               {{{5, 8, 12}}, {{30, 40, 10}}}, 0.9);
  const InstanceMaskSet found = ProposeInstances(x);
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ((std::array{found[0].top, found[0].left, found[0].height, found[0].width}),
            (std::array{5, 8, 12, 12}));
  EXPECT_EQ(found[0].area, 144);
  EXPECT_EQ((std::array{found[1].top, found[1].left, found[1].height, found[1].width}),
            (std::array{30, 40, 10, 10}));
  EXPECT_EQ(found[1].area, 100);
}

TEST(Proposals, CappedSortedAndDeterministic) {
  std::vector<std::array<int, 3>> squares;
  for (int k = 0; k < 20; ++k) squares.push_back({(k / 5) * 24 + 2, (k % 5) * 24 + 2, 5 + k % 9});
  const Tensor x = WithSquares(Tensor(Shape{1, 3, 100, 124}, 0.0), squares, 1.0);
  const InstanceMaskSet found = ProposeInstances(x);
  ASSERT_EQ(found.size(), 8u);
  for (size_t i = 1; i < found.size(); ++i) EXPECT_GE(found[i - 1].area, found[i].area);
  EXPECT_EQ(found[0].area, 13 * 13);
  EXPECT_EQ(ProposeInstances(x), found);
  for (const InstanceBox& b : found) {
    EXPECT_GE(b.top, 0);
    EXPECT_LE(b.top + b.height, 100);
    EXPECT_LE(b.left + b.width, 124);
  }
  ProposalConfig tight;
  tight.max_instances = 3;
  EXPECT_EQ(ProposeInstances(x, tight).size(), 3u);
}

TEST_F(ClipTest, InstanceLossReductions) {
  const Tensor x = WithSquares(WaveImage(48, 48), {{{4, 4, 14}}, {{25, 20, 16}}}, 1.0);
  const Tensor xhat = Noisy(x, 0.15, 2);
  const Var vx = Var::Constant(x), vh = Var::Constant(xhat);
  const InstanceMaskSet masks = ProposeInstances(x);
  ASSERT_FALSE(masks.empty());
  EXPECT_EQ(Scalar(LossInstance(vx, vh, {}, model_)), 0.0);
  EXPECT_LE(std::abs(Scalar(LossInstance(vx, vx, masks, model_))), 1e-6);
  EXPECT_GT(Scalar(LossInstance(vx, vh, masks, model_)), 0.0);
  EXPECT_GE(Scalar(LossInstance(vx, vh, masks, model_, true)), 0.0);

  InstanceBox whole{0, 0, 48, 48, 48 * 48, std::vector<uint8_t>(48 * 48, 1)};
  EXPECT_NEAR(Scalar(LossInstance(vx, vh, {whole}, model_)), Scalar(LossGlobal(vx, vh, model_)),
              1e-6);
}

MsClipConfig Weights(double g, double l, double i) {
  MsClipConfig c;
  c.weight_global = g;
  c.weight_local = l;
  c.weight_instance = i;
  return c;
}

Tensor SceneBatch(int n, int size, uint64_t seed) {
  std::vector<Tensor> items;
  Rng rng(seed);
  for (int k = 0; k < n; ++k) {
    Tensor x = WaveImage(size, size);
    for (double& v : x.values()) v = 0.3 * v + 0.2 * rng.Uniform();
    const int side = size / 4;
    items.push_back(WithSquares(std::move(x),
                                {{{static_cast<int>(rng.Below(size - side)),
                                   static_cast<int>(rng.Below(size - side)), side}}},
                                0.95));
  }
  return Stack(items);
}

TEST_F(ClipTest, MsClipReductions) {
  const Tensor x = SceneBatch(3, 48, 1);
  const Var vx = Var::Constant(x), vh = Var::Constant(Noisy(x, 0.1, 4));
  Rng r0(1);
  EXPECT_LE(std::abs(Scalar(LossMsClip(vx, vx, MsClipConfig{}, model_, r0))), 1e-6);

  Rng r1(1);
  EXPECT_EQ(Scalar(LossMsClip(vx, vh, Weights(1, 0, 0), model_, r1)),
            Scalar(LossGlobal(vx, vh, model_)));

  auto eval = [&](const MsClipConfig& c) {
    Rng rng(8);
    return Scalar(LossMsClip(vx, vh, c, model_, rng));
  };
  const double all = eval(Weights(1, 1, 1));
  const double g = eval(Weights(1, 0, 0)), l = eval(Weights(0, 1, 0)), i = eval(Weights(0, 0, 1));
  EXPECT_GE(all, g);
  EXPECT_GE(all, l);
  EXPECT_GE(all, i);
  EXPECT_NEAR(all, g + l + i, 1e-12);
  EXPECT_EQ(eval(Weights(1, 1, 1)), all);
}

TEST_F(ClipTest, MsClipGradientMatchesFiniteDifferences) {
  const Tensor x = SceneBatch(1, 32, 6);
  ASSERT_FALSE(ProposeInstances(x).empty());
  InstanceCache cache;
  auto f = [&](const Var& xhat) {
    Rng rng(21);
    return LossMsClip(Var::Constant(x), xhat, MsClipConfig{}, model_, rng, &cache);
  };
  EXPECT_LT(MaxRelativeGradError(f, Noisy(x, 0.1, 3)), 1e-3);
  EXPECT_EQ(cache.size(), 1u);
}

TEST(MsClipConfig, Validation) {
  MsClipConfig c;
  c.weight_local = -1;
  EXPECT_EQ(ThrownKind([&] { c.Validate(); }), ErrorKind::kInvalidConfig);
  c = MsClipConfig{};
  c.min_crop_fraction = 0.6;
  EXPECT_EQ(ThrownKind([&] { c.Validate(); }), ErrorKind::kInvalidConfig);
}

TEST(Registry, KnownAndUnknownNames) {
  EXPECT_EQ(MakeEmbeddingModel("tiny-test")->dimension(), 64);
  EXPECT_EQ(ThrownKind([] { MakeEmbeddingModel("resnet"); }), ErrorKind::kNotFound);
  EXPECT_EQ(ThrownKind([] { MakeEmbeddingModel("clip-vit-b32"); }), ErrorKind::kNotFound);
}

}  // namespace
}  // namespace ugicm
