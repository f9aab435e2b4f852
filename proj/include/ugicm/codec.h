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

#ifndef UGICM_CODEC_H_
#define UGICM_CODEC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ugicm/autograd.h"
#include "ugicm/nn.h"
#include "ugicm/rng.h"
#include "ugicm/tensor.h"

namespace ugicm {

// Total spatial downsampling of the analysis transform (4 stride-2 stages).
inline constexpr int kDownsampling = 16;
// Two further stride-2 stages of the hyper analysis transform.
inline constexpr int kHyperDownsampling = 4;
inline constexpr double kScaleFloor = 1e-6;
inline constexpr double kLikelihoodFloor = 0x1.0p-24;
inline constexpr double kLeakySlope = 0.01;

enum class QuantizeMode { kNoise, kRound };

std::string QuantizeModeName(QuantizeMode mode);
QuantizeMode ParseQuantizeMode(const std::string& name);

// Decode-time preference: 0 selects the human branch, 1 the machine branch.
class PreferenceCondition {
 public:
  static PreferenceCondition Human() { return PreferenceCondition(0.0); }
  static PreferenceCondition Machine() { return PreferenceCondition(1.0); }
  // Accepts "human"/"machine" or "0"/"1".
  static PreferenceCondition Parse(const std::string& text);
  // Throws kInvalidConfig for anything but 0 or 1.
  static PreferenceCondition FromBeta(double beta);

  double beta() const { return beta_; }
  bool is_machine() const { return beta_ == 1.0; }
  std::string name() const { return is_machine() ? "machine" : "human"; }
  bool operator==(const PreferenceCondition&) const = default;

 private:
  explicit PreferenceCondition(double beta) : beta_(beta) {}
  double beta_;
};

struct CodecConfig {
  int channels = 128;        // N
  int latent_channels = 192;  // M
  int stages = 4;
  double lambda = 0.0067;
  QuantizeMode quantize_mode = QuantizeMode::kNoise;

  void Validate() const;
  // Stable text form used for digests and checkpoints.
  std::string Canonical() const;
  uint64_t Digest() const;
};

// Default rate points of the lambda sweep.
inline constexpr double kLambdaGrid[] = {0.0018, 0.0035, 0.0067, 0.013};

// Image batch (n, 3, h, w) with values in [0, 1].
void ValidateImage(const Tensor& image);

struct PaddedImage {
  Tensor image;
  int height = 0;  // original size before padding
  int width = 0;
};

// Edge-replicates to the next multiple of `multiple`.
PaddedImage PadToMultiple(const Tensor& image, int multiple = kDownsampling);
Tensor CropImage(const Tensor& image, int height, int width);

// Element-wise rounding, or additive uniform noise in [-0.5, 0.5) drawn from
// a generator seeded with `seed`.
Tensor Quantize(const Tensor& y, QuantizeMode mode, uint64_t seed);
Tensor UniformNoise(const Shape& shape, Rng& rng);

// Preference-conditional decoding module attached to a decoder block of
// channel depth d: out = f + (MLP(beta) * W_d) broadcast over space.
class Pcdm {
 public:
  Pcdm() = default;
  Pcdm(ParameterStore& store, const std::string& name, int depth, Rng* rng);

  Var Apply(const Var& features, const PreferenceCondition& beta) const;
  // The length-d bias vector (1, d, 1, 1) for `beta`.
  Var Bias(const PreferenceCondition& beta) const;
  int depth() const { return depth_; }

 private:
  LinearLayer hidden_;
  LinearLayer output_;
  Parameter* weighting_ = nullptr;
  int depth_ = 0;
};

struct EntropyParameters {
  Var means;
  Var scales;
};

struct CodecForward {
  Var y;
  Var y_hat;
  Var z_hat;
  Var x_hat;  // unclamped reconstruction
  Var bits;   // latent + hyper-latent bits
};

// Analysis/synthesis transforms with a mean-scale hyperprior and PCDM blocks
// after each synthesis upsampling stage.
class Codec {
 public:
  Codec(const CodecConfig& config, uint64_t seed);
  // Adopts existing parameters, e.g. from a checkpoint.
  Codec(const CodecConfig& config, ParameterStore params);
  Codec(const Codec& other);
  Codec& operator=(const Codec& other);

  const CodecConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Image (n, 3, h, w) with h, w multiples of 16 -> latent (n, M, h/16, w/16).
  Var Encode(const Var& x) const;
  Var HyperEncode(const Var& y) const;
  // Gaussian parameters for a latent of spatial size (height, width).
  EntropyParameters HyperDecode(const Var& z_hat, int height, int width) const;
  EntropyParameters HyperPrior(const Shape& z_shape) const;
  // -log2 likelihood of (y_hat, z_hat) under the entropy model.
  Var RateBits(const Var& y_hat, const Var& z_hat) const;
  // Unclamped synthesis.
  Var Decode(const Var& y_hat, const PreferenceCondition& beta) const;
  const Pcdm& pcdm(int block) const { return pcdms_.at(block); }

  CodecForward Forward(const Var& x, const PreferenceCondition& beta,
                       QuantizeMode mode, Rng& noise) const;

  // Inference helpers (no graph recording).
  Tensor EncodeImage(const Tensor& x) const;
  Tensor DecodeImage(const Tensor& y_hat, const PreferenceCondition& beta) const;

 private:
  void BuildLayers(Rng* rng);

  CodecConfig config_;
  ParameterStore params_;
  std::vector<Conv2dLayer> encoder_;
  std::vector<Conv2dLayer> hyper_encoder_;
  ConvTranspose2dLayer hyper_up0_;
  ConvTranspose2dLayer hyper_up1_;
  Conv2dLayer hyper_out_;
  Parameter* prior_mean_ = nullptr;
  Parameter* prior_scale_ = nullptr;
  std::vector<ConvTranspose2dLayer> decoder_;
  std::vector<Pcdm> pcdms_;
};

// Canonical parameter-name prefixes of the three disjoint parameter sets.
inline const std::vector<std::string> kEncoderPrefixes = {"encoder."};
inline const std::vector<std::string> kEntropyPrefixes = {
    "hyper_encoder.", "hyper_decoder.", "prior."};
inline const std::vector<std::string> kDecoderPrefixes = {"decoder."};

}  // namespace ugicm

#endif  // UGICM_CODEC_H_
