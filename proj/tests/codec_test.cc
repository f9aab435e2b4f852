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

#include "ugicm/codec.h"

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.h"
#include "ugicm/bitstream.h"
#include "ugicm/compression.h"
#include "ugicm/ops.h"

namespace ugicm {
namespace {

using testing::MaxRelativeGradError;
using testing::RandomTensor;
using testing::ThrownKind;

CodecConfig SmallConfig() {
  CodecConfig c;
  c.channels = 16;
  c.latent_channels = 8;
  return c;
}

TEST(Encode, DefaultSizedLatentShape) {
  const Codec codec(CodecConfig{}, 1);
  const Tensor x = RandomTensor(Shape{1, 3, 256, 256}, 2, 0.0, 1.0);
  const Tensor y = codec.EncodeImage(x);
  EXPECT_EQ(y.shape(), (Shape{1, 192, 16, 16}));
  EXPECT_EQ(codec.EncodeImage(x).vec(), y.vec());
}

TEST(Encode, RejectsUnpaddedInput) {
  const Codec codec(SmallConfig(), 1);
  const Tensor x(Shape{1, 3, 255, 255});
  EXPECT_EQ(ThrownKind([&] { codec.EncodeImage(x); }), ErrorKind::kDimensionMismatch);
}

TEST(Encode, SameSeedSameParameters) {
  const Codec a(SmallConfig(), 5), b(SmallConfig(), 5), c(SmallConfig(), 6);
  EXPECT_EQ(a.params().Digest({""}), b.params().Digest({""}));
  EXPECT_NE(a.params().Digest({""}), c.params().Digest({""}));
}

TEST(Quantize, RoundAndNoise) {
  Tensor y(Shape{1, 1, 1, 2});
  y[0] = 0.4;
  y[1] = -1.6;
  const Tensor r = Quantize(y, QuantizeMode::kRound, 0);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], -2.0);

  const Tensor big = RandomTensor(Shape{1, 4, 16, 16}, 3, -5.0, 5.0);
  const Tensor n1 = Quantize(big, QuantizeMode::kNoise, 42);
  const Tensor n2 = Quantize(big, QuantizeMode::kNoise, 42);
  EXPECT_EQ(n1.vec(), n2.vec());
  for (size_t i = 0; i < big.size(); ++i) {
    EXPECT_GE(n1[i] - big[i], -0.5);
    EXPECT_LT(n1[i] - big[i], 0.5);
  }
  EXPECT_NE(Quantize(big, QuantizeMode::kNoise, 43).vec(), n1.vec());
}

TEST(Pcdm, ZeroInitIsIdentity) {
  const Codec codec(SmallConfig(), 1);
  for (int block = 0; block < 4; ++block) {
    const Pcdm& pcdm = codec.pcdm(block);
    const Tensor f = RandomTensor(Shape{2, pcdm.depth(), 5, 3}, 10 + block, -3, 3);
    for (const auto& beta : {PreferenceCondition::Human(), PreferenceCondition::Machine()}) {
      EXPECT_EQ(pcdm.Apply(Var::Constant(f), beta).value().vec(), f.vec());
    }
  }
  EXPECT_EQ(codec.pcdm(3).depth(), 3);
  EXPECT_EQ(codec.pcdm(0).depth(), 16);
}

TEST(Pcdm, ConstantBiasWithUnitWeighting) {
  Codec codec(SmallConfig(), 1);
  const double c = 0.375;
  codec.params().Get("decoder.pcdm1.fc2.bias").value.Fill(c);
  const Tensor& w = codec.params().Get("decoder.pcdm1.weighting").value;
  for (size_t i = 0; i < w.size(); ++i) ASSERT_EQ(w[i], 1.0);
  const Tensor f = RandomTensor(Shape{1, 16, 4, 4}, 7, -1, 1);
  const Tensor out =
      codec.pcdm(1).Apply(Var::Constant(f), PreferenceCondition::Machine()).value();
  for (size_t i = 0; i < f.size(); ++i) EXPECT_EQ(out[i], f[i] + c);
}

TEST(Pcdm, DepthMismatch) {
  const Codec codec(SmallConfig(), 1);
  const Tensor f(Shape{1, 5, 2, 2});
  EXPECT_EQ(ThrownKind([&] {
              codec.pcdm(0).Apply(Var::Constant(f), PreferenceCondition::Human());
            }),
            ErrorKind::kDepthMismatch);
}

TEST(Decode, PaperSizedOutputInRange) {
  const Codec codec(CodecConfig{}, 1);
  const Tensor y = RandomTensor(Shape{1, 192, 16, 16}, 4, -4.0, 4.0);
  const Tensor x = codec.DecodeImage(Quantize(y, QuantizeMode::kRound, 0),
                                     PreferenceCondition::Human());
  EXPECT_EQ(x.shape(), (Shape{1, 3, 256, 256}));
  for (double v : x.vec()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Decode, InconsistentLatent) {
  const Codec codec(SmallConfig(), 1);
  const Tensor y(Shape{1, 7, 2, 2});
  EXPECT_EQ(ThrownKind([&] { codec.DecodeImage(y, PreferenceCondition::Human()); }),
            ErrorKind::kShapeMismatch);
}

TEST(Decode, PreferenceInvariantAtInit) {
  const Codec codec(SmallConfig(), 3);
  for (int i = 0; i < 10; ++i) {
    const Tensor y = Quantize(RandomTensor(Shape{1, 8, 3, 4}, 100 + i, -6, 6),
                              QuantizeMode::kRound, 0);
    EXPECT_EQ(codec.DecodeImage(y, PreferenceCondition::Human()).vec(),
              codec.DecodeImage(y, PreferenceCondition::Machine()).vec());
  }
}

TEST(Decode, RoundTripShape) {
  const Codec codec(SmallConfig(), 3);
  const Tensor x = RandomTensor(Shape{1, 3, 37, 50}, 9, 0, 1);
  const PaddedImage p = PadToMultiple(x);
  EXPECT_EQ(p.image.shape(), (Shape{1, 3, 48, 64}));
  const Tensor back = CropImage(
      codec.DecodeImage(Quantize(codec.EncodeImage(p.image), QuantizeMode::kRound, 0),
                        PreferenceCondition::Human()),
      p.height, p.width);
  EXPECT_EQ(back.shape(), x.shape());
}

TEST(Rate, NoiseModeGradientMatchesFiniteDifferences) {
  const Codec codec(SmallConfig(), 8);
  const Tensor y0 = RandomTensor(Shape{1, 8, 4, 4}, 21, -3, 3);
  Rng rng(5);
  const Tensor u = UniformNoise(y0.shape(), rng);
  const Var probe = codec.HyperEncode(Var::Constant(y0));
  const Tensor v = UniformNoise(probe.shape(), rng);
  auto rate = [&](const Var& y) {
    const Var y_tilde = AddConstant(y, u);
    const Var z_tilde = AddConstant(codec.HyperEncode(y), v);
    return codec.RateBits(y_tilde, z_tilde);
  };
  EXPECT_LT(MaxRelativeGradError(rate, y0), 1e-3);
}

TEST(Rate, NonNegative) {
  const Codec codec(SmallConfig(), 8);
  for (int i = 0; i < 5; ++i) {
    const Tensor y = Quantize(RandomTensor(Shape{1, 8, 4, 4}, 30 + i, -40, 40),
                              QuantizeMode::kRound, 0);
    const Tensor z = Quantize(codec.HyperEncode(Var::Constant(y)).value(),
                              QuantizeMode::kRound, 0);
    EXPECT_GE(codec.RateBits(Var::Constant(y), Var::Constant(z)).value()[0], 0.0);
  }
}

TEST(Compression, LatentsSurviveEntropyCoding) {
  const Codec codec(SmallConfig(), 2);
  for (int i = 0; i < 5; ++i) {
    const Tensor x = RandomTensor(Shape{1, 3, 40 + 8 * i, 64}, 50 + i, 0, 1);
    const CompressResult c = CompressImage(codec, x);
    const Tensor direct =
        Quantize(codec.EncodeImage(PadToMultiple(x).image), QuantizeMode::kRound, 0);
    EXPECT_EQ(c.y_hat.vec(), direct.vec());
    const Bitstream back = UnpackBitstream(PackBitstream(c.stream));
    for (const auto& beta : {PreferenceCondition::Human(), PreferenceCondition::Machine()}) {
      const DecompressResult d = DecompressImage(codec, back, beta);
      EXPECT_EQ(d.y_hat.vec(), direct.vec());
      EXPECT_EQ(d.z_hat.vec(), c.z_hat.vec());
      EXPECT_EQ(d.image.shape(), x.shape());
    }
  }
}

TEST(Compression, EstimateTracksCodedLength) {
  const Codec codec(SmallConfig(), 4);
  for (int i = 0; i < 10; ++i) {
    const Tensor x = RandomTensor(Shape{1, 3, 64, 64}, 70 + i, 0, 1);
    const CompressResult c = CompressImage(codec, x);
    const double actual = 8.0 * c.stream.payload_bytes();
    EXPECT_LE(std::abs(c.estimated_bits - actual), 0.02 * actual + 64 * 8)
        << "estimate " << c.estimated_bits << " actual " << actual;
  }
}

TEST(Compression, DigestMismatch) {
  const Codec codec(SmallConfig(), 4);
  CodecConfig other_config = SmallConfig();
  other_config.lambda = 0.013;
  const Codec other(other_config, 4);
  const CompressResult c = CompressImage(codec, RandomTensor(Shape{1, 3, 32, 32}, 1, 0, 1));
  EXPECT_EQ(ThrownKind([&] { DecompressImage(other, c.stream, PreferenceCondition::Human()); }),
            ErrorKind::kDigestMismatch);
}

TEST(Compression, CorruptLatentSegment) {
  const Codec codec(SmallConfig(), 4);
  CompressResult c = CompressImage(codec, RandomTensor(Shape{1, 3, 32, 32}, 1, 0, 1));
  c.stream.latent_segment.resize(c.stream.latent_segment.size() / 2);
  EXPECT_EQ(ThrownKind([&] { DecodeLatents(codec, c.stream); }), ErrorKind::kCorruptStream);
}

}  // namespace
}  // namespace ugicm
