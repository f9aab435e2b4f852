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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ugicm/digest.h"
#include "ugicm/errors.h"
#include "ugicm/ops.h"

namespace ugicm {

std::string QuantizeModeName(QuantizeMode mode) {
  return mode == QuantizeMode::kNoise ? "noise" : "round";
}

QuantizeMode ParseQuantizeMode(const std::string& name) {
  if (name == "noise") return QuantizeMode::kNoise;
  if (name == "round") return QuantizeMode::kRound;
  Fail(ErrorKind::kInvalidConfig, "unknown quantize mode '" + name + "'");
}

PreferenceCondition PreferenceCondition::Parse(const std::string& text) {
  if (text == "human" || text == "0") return Human();
  if (text == "machine" || text == "1") return Machine();
  Fail(ErrorKind::kInvalidConfig,
       "preference must be human or machine, got '" + text + "'");
}

PreferenceCondition PreferenceCondition::FromBeta(double beta) {
  if (beta == 0.0) return Human();
  if (beta == 1.0) return Machine();
  Fail(ErrorKind::kInvalidConfig, "beta must be 0 or 1");
}

void CodecConfig::Validate() const {
  if (channels <= 0 || latent_channels <= 0) {
    Fail(ErrorKind::kInvalidConfig, "channel counts must be positive");
  }
  if (stages != 4) Fail(ErrorKind::kInvalidConfig, "stages must be 4");
  if (!(lambda > 0.0)) Fail(ErrorKind::kInvalidConfig, "lambda must be > 0");
}

std::string CodecConfig::Canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "N=" << channels << ";M=" << latent_channels << ";stages=" << stages
     << ";lambda=" << lambda << ";quantize=" << QuantizeModeName(quantize_mode);
  return os.str();
}

uint64_t CodecConfig::Digest() const {
  Fnv1a h;
  h.Update(Canonical());
  return h.value();
}

void ValidateImage(const Tensor& image) {
  const Shape& s = image.shape();
  if (s.c != 3 || s.h <= 0 || s.w <= 0) {
    Fail(ErrorKind::kShapeMismatch, "image must be (n, 3, h, w), got " + s.str());
  }
  for (double v : image.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      Fail(ErrorKind::kNumeric, "image values must lie in [0, 1]");
    }
  }
}

PaddedImage PadToMultiple(const Tensor& image, int multiple) {
  const Shape s = image.shape();
  const int ph = (s.h + multiple - 1) / multiple * multiple;
  const int pw = (s.w + multiple - 1) / multiple * multiple;
  Tensor out(Shape{s.n, s.c, ph, pw});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int i = 0; i < ph; ++i) {
        const int si = std::min(i, s.h - 1);
        for (int j = 0; j < pw; ++j) {
          out.at(n, c, i, j) = image.at(n, c, si, std::min(j, s.w - 1));
        }
      }
    }
  }
  return PaddedImage{std::move(out), s.h, s.w};
}

Tensor CropImage(const Tensor& image, int height, int width) {
  NoGradGuard guard;
  return Crop(Var::Constant(image), 0, 0, height, width).value();
}

Tensor UniformNoise(const Shape& shape, Rng& rng) {
  Tensor noise(shape);
  for (double& v : noise.values()) v = rng.Uniform() - 0.5;
  return noise;
}

Tensor Quantize(const Tensor& y, QuantizeMode mode, uint64_t seed) {
  Tensor out = y;
  if (mode == QuantizeMode::kRound) {
    for (double& v : out.values()) v = std::round(v);
  } else {
    Rng rng(seed);
    out.Add(UniformNoise(y.shape(), rng));
  }
  return out;
}

Pcdm::Pcdm(ParameterStore& store, const std::string& name, int depth, Rng* rng)
    : hidden_(store, name + ".fc1", 1, 2 * depth, rng),
      output_(store, name + ".fc2", 2 * depth, depth, rng),
      depth_(depth) {
  if (rng != nullptr) {
    // Zero-initialized output layer: the decoder starts beta-agnostic.
    output_.weight().value.Fill(0.0);
    output_.bias().value.Fill(0.0);
    weighting_ = &store.Add(name + ".weighting", Tensor(Shape{1, depth, 1, 1}, 1.0));
  } else {
    weighting_ = &AddOrGet(store, name + ".weighting", Shape{1, depth, 1, 1}, 1, nullptr);
  }
}

Var Pcdm::Bias(const PreferenceCondition& beta) const {
  const Var condition = Var::Constant(Tensor(Shape{1, 1, 1, 1}, beta.beta()));
  const Var f_beta =
      output_.Forward(LeakyRelu(hidden_.Forward(condition), kLeakySlope));
  return Mul(f_beta, Bind(*weighting_));
}

Var Pcdm::Apply(const Var& features, const PreferenceCondition& beta) const {
  if (features.shape().c != depth_) {
    Fail(ErrorKind::kDepthMismatch,
         "PCDM of depth " + std::to_string(depth_) + " applied to " +
             features.shape().str());
  }
  return AddChannelVector(features, Bias(beta));
}

Codec::Codec(const CodecConfig& config, uint64_t seed) : config_(config) {
  config_.Validate();
  Rng rng(seed);
  BuildLayers(&rng);
}

Codec::Codec(const CodecConfig& config, ParameterStore params)
    : config_(config), params_(std::move(params)) {
  config_.Validate();
  BuildLayers(nullptr);
}

Codec::Codec(const Codec& other)
    : config_(other.config_), params_(other.params_) {
  BuildLayers(nullptr);
}

Codec& Codec::operator=(const Codec& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    BuildLayers(nullptr);
  }
  return *this;
}

void Codec::BuildLayers(Rng* rng) {
  const int n = config_.channels;
  const int m = config_.latent_channels;
  const int wide = n * 3 / 2;
  encoder_ = {
      Conv2dLayer(params_, "encoder.conv0", 3, n, 5, 2, rng),
      Conv2dLayer(params_, "encoder.conv1", n, n, 5, 2, rng),
      Conv2dLayer(params_, "encoder.conv2", n, n, 5, 2, rng),
      Conv2dLayer(params_, "encoder.conv3", n, m, 5, 2, rng),
  };
  hyper_encoder_ = {
      Conv2dLayer(params_, "hyper_encoder.conv0", m, n, 3, 1, rng),
      Conv2dLayer(params_, "hyper_encoder.conv1", n, n, 5, 2, rng),
      Conv2dLayer(params_, "hyper_encoder.conv2", n, n, 5, 2, rng),
  };
  hyper_up0_ = ConvTranspose2dLayer(params_, "hyper_decoder.deconv0", n, n, 5, 2, rng);
  hyper_up1_ = ConvTranspose2dLayer(params_, "hyper_decoder.deconv1", n, wide, 5, 2, rng);
  hyper_out_ = Conv2dLayer(params_, "hyper_decoder.conv2", wide, 2 * m, 3, 1, rng);
  if (rng != nullptr) {
    prior_mean_ = &params_.Add("prior.mean", Tensor(Shape{1, n, 1, 1}, 0.0));
    // softplus(0.5413) == 1
    prior_scale_ = &params_.Add("prior.scale", Tensor(Shape{1, n, 1, 1}, 0.5413248546129181));
  } else {
    prior_mean_ = &AddOrGet(params_, "prior.mean", Shape{1, n, 1, 1}, 1, nullptr);
    prior_scale_ = &AddOrGet(params_, "prior.scale", Shape{1, n, 1, 1}, 1, nullptr);
  }
  decoder_ = {
      ConvTranspose2dLayer(params_, "decoder.deconv0", m, n, 5, 2, rng),
      ConvTranspose2dLayer(params_, "decoder.deconv1", n, n, 5, 2, rng),
      ConvTranspose2dLayer(params_, "decoder.deconv2", n, n, 5, 2, rng),
      ConvTranspose2dLayer(params_, "decoder.deconv3", n, 3, 5, 2, rng),
  };
  pcdms_ = {
      Pcdm(params_, "decoder.pcdm0", n, rng),
      Pcdm(params_, "decoder.pcdm1", n, rng),
      Pcdm(params_, "decoder.pcdm2", n, rng),
      Pcdm(params_, "decoder.pcdm3", 3, rng),
  };
}

Var Codec::Encode(const Var& x) const {
  const Shape s = x.shape();
  if (s.c != 3) {
    Fail(ErrorKind::kShapeMismatch, "encoder expects 3 channels, got " + s.str());
  }
  if (s.h % kDownsampling != 0 || s.w % kDownsampling != 0) {
    Fail(ErrorKind::kDimensionMismatch,
         "image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
             " is not divisible by " + std::to_string(kDownsampling) +
             "; pad it first");
  }
  Var h = x;
  for (size_t i = 0; i < encoder_.size(); ++i) {
    h = encoder_[i].Forward(h);
    if (i + 1 < encoder_.size()) h = LeakyRelu(h, kLeakySlope);
  }
  return h;
}

Var Codec::HyperEncode(const Var& y) const {
  Var h = y;
  for (size_t i = 0; i < hyper_encoder_.size(); ++i) {
    h = hyper_encoder_[i].Forward(h);
    if (i + 1 < hyper_encoder_.size()) h = LeakyRelu(h, kLeakySlope);
  }
  return h;
}

EntropyParameters Codec::HyperDecode(const Var& z_hat, int height,
                                     int width) const {
  Var h = LeakyRelu(hyper_up0_.Forward(z_hat), kLeakySlope);
  h = LeakyRelu(hyper_up1_.Forward(h), kLeakySlope);
  h = hyper_out_.Forward(h);
  // The hyper-latent grid is ceil(size / 4); trim back to the latent grid.
  h = Crop(h, 0, 0, height, width);
  const int m = config_.latent_channels;
  return EntropyParameters{SliceChannels(h, 0, m),
                           Softplus(SliceChannels(h, m, 2 * m))};
}

EntropyParameters Codec::HyperPrior(const Shape& z_shape) const {
  return EntropyParameters{
      BroadcastChannels(Bind(*prior_mean_), z_shape),
      BroadcastChannels(Softplus(Bind(*prior_scale_)), z_shape)};
}

Var Codec::RateBits(const Var& y_hat, const Var& z_hat) const {
  const Shape ys = y_hat.shape();
  if (ys.c != config_.latent_channels) {
    Fail(ErrorKind::kShapeMismatch, "latent has " + std::to_string(ys.c) +
                                        " channels, model expects " +
                                        std::to_string(config_.latent_channels));
  }
  const EntropyParameters y_params = HyperDecode(z_hat, ys.h, ys.w);
  const EntropyParameters z_params = HyperPrior(z_hat.shape());
  const Var y_bits = TotalBits(
      GaussianLikelihood(y_hat, y_params.means, y_params.scales, kScaleFloor),
      kLikelihoodFloor);
  const Var z_bits = TotalBits(
      GaussianLikelihood(z_hat, z_params.means, z_params.scales, kScaleFloor),
      kLikelihoodFloor);
  return Add(y_bits, z_bits);
}

Var Codec::Decode(const Var& y_hat, const PreferenceCondition& beta) const {
  if (y_hat.shape().c != config_.latent_channels) {
    Fail(ErrorKind::kShapeMismatch, "latent " + y_hat.shape().str() +
                                        " inconsistent with M=" +
                                        std::to_string(config_.latent_channels));
  }
  Var h = y_hat;
  for (size_t i = 0; i < decoder_.size(); ++i) {
    h = pcdms_[i].Apply(decoder_[i].Forward(h), beta);
    if (i + 1 < decoder_.size()) h = LeakyRelu(h, kLeakySlope);
  }
  return h;
}

CodecForward Codec::Forward(const Var& x, const PreferenceCondition& beta,
                            QuantizeMode mode, Rng& noise) const {
  CodecForward out;
  out.y = Encode(x);
  const Var z = HyperEncode(out.y);
  if (mode == QuantizeMode::kNoise) {
    out.y_hat = AddConstant(out.y, UniformNoise(out.y.shape(), noise));
    out.z_hat = AddConstant(z, UniformNoise(z.shape(), noise));
  } else {
    out.y_hat = Var::Constant(Quantize(out.y.value(), mode, 0));
    out.z_hat = Var::Constant(Quantize(z.value(), mode, 0));
  }
  out.bits = RateBits(out.y_hat, out.z_hat);
  out.x_hat = Decode(out.y_hat, beta);
  return out;
}

Tensor Codec::EncodeImage(const Tensor& x) const {
  NoGradGuard guard;
  return Encode(Var::Constant(x)).value();
}

Tensor Codec::DecodeImage(const Tensor& y_hat,
                          const PreferenceCondition& beta) const {
  NoGradGuard guard;
  return Clamp(Decode(Var::Constant(y_hat), beta), 0.0, 1.0).value();
}

}  // namespace ugicm
