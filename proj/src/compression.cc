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

#include "ugicm/compression.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ugicm/entropy_coder.h"
#include "ugicm/errors.h"
#include "ugicm/ops.h"

namespace ugicm {
namespace {

int Support(const Tensor& quantized) {
  return static_cast<int>(quantized.MaxAbs()) + 1;
}

int HyperSize(int latent_size) { return (((latent_size + 1) / 2) + 1) / 2; }

std::vector<SymbolCdf> HyperCdfs(const Codec& codec, const Shape& z_shape,
                                 int support) {
  const EntropyParameters prior = codec.HyperPrior(Shape{1, z_shape.c, 1, 1});
  std::vector<SymbolCdf> per_channel;
  for (int c = 0; c < z_shape.c; ++c) {
    per_channel.push_back(GaussianCdf(prior.means.value()[c],
                                      std::max(prior.scales.value()[c], kScaleFloor),
                                      support));
  }
  std::vector<SymbolCdf> cdfs;
  cdfs.reserve(z_shape.size());
  for (int c = 0; c < z_shape.c; ++c) {
    for (size_t i = 0; i < z_shape.plane(); ++i) cdfs.push_back(per_channel[c]);
  }
  return cdfs;
}

std::vector<SymbolCdf> LatentCdfs(const Codec& codec, const Tensor& z_hat,
                                  int height, int width, int support) {
  const EntropyParameters p = codec.HyperDecode(Var::Constant(z_hat), height, width);
  std::vector<SymbolCdf> cdfs;
  cdfs.reserve(p.means.value().size());
  for (size_t i = 0; i < p.means.value().size(); ++i) {
    cdfs.push_back(GaussianCdf(p.means.value()[i],
                               std::max(p.scales.value()[i], kScaleFloor), support));
  }
  return cdfs;
}

std::vector<int32_t> ToSymbols(const Tensor& quantized, int support) {
  std::vector<int32_t> symbols(quantized.size());
  for (size_t i = 0; i < quantized.size(); ++i) {
    symbols[i] = static_cast<int32_t>(quantized[i]) + support;
  }
  return symbols;
}

Tensor FromSymbols(const std::vector<int32_t>& symbols, const Shape& shape,
                   int support) {
  Tensor t(shape);
  for (size_t i = 0; i < symbols.size(); ++i) t[i] = symbols[i] - support;
  return t;
}

}  // namespace

CompressResult CompressImage(const Codec& codec, const Tensor& image) {
  ValidateImage(image);
  if (image.shape().n != 1) {
    Fail(ErrorKind::kShapeMismatch, "CompressImage takes a single image");
  }
  NoGradGuard guard;
  const PaddedImage padded = PadToMultiple(image);
  const Var y = codec.Encode(Var::Constant(padded.image));
  const Var z = codec.HyperEncode(y);

  CompressResult result;
  result.y_hat = Quantize(y.value(), QuantizeMode::kRound, 0);
  result.z_hat = Quantize(z.value(), QuantizeMode::kRound, 0);
  result.estimated_bits =
      codec.RateBits(Var::Constant(result.y_hat), Var::Constant(result.z_hat)).value()[0];

  const int z_support = Support(result.z_hat);
  const int y_support = Support(result.y_hat);
  const Shape ys = result.y_hat.shape();
  result.stream.hyper_segment =
      RangeEncode(ToSymbols(result.z_hat, z_support),
                  HyperCdfs(codec, result.z_hat.shape(), z_support));
  result.stream.latent_segment =
      RangeEncode(ToSymbols(result.y_hat, y_support),
                  LatentCdfs(codec, result.z_hat, ys.h, ys.w, y_support));

  BitstreamHeader& h = result.stream.header;
  h.height = static_cast<uint32_t>(padded.height);
  h.width = static_cast<uint32_t>(padded.width);
  h.padded_height = static_cast<uint32_t>(padded.image.shape().h);
  h.padded_width = static_cast<uint32_t>(padded.image.shape().w);
  h.config_digest = codec.config().Digest();
  h.latent_support = static_cast<uint32_t>(y_support);
  h.hyper_support = static_cast<uint32_t>(z_support);
  h.segment_lengths = {static_cast<uint32_t>(result.stream.hyper_segment.size()),
                       static_cast<uint32_t>(result.stream.latent_segment.size())};
  return result;
}

DecompressResult DecodeLatents(const Codec& codec, const Bitstream& stream) {
  const BitstreamHeader& h = stream.header;
  if (h.config_digest != codec.config().Digest()) {
    Fail(ErrorKind::kDigestMismatch,
         "bitstream was produced by a different codec configuration");
  }
  if (h.padded_height % kDownsampling != 0 || h.padded_width % kDownsampling != 0 ||
      h.padded_height == 0 || h.padded_width == 0 || h.height > h.padded_height ||
      h.width > h.padded_width || h.height == 0 || h.width == 0) {
    Fail(ErrorKind::kCorruptStream, "inconsistent image size in header");
  }
  if (h.latent_support == 0 || h.hyper_support == 0 ||
      h.latent_support >= kCdfTotal / 2 || h.hyper_support >= kCdfTotal / 2) {
    Fail(ErrorKind::kCorruptStream, "symbol support out of range");
  }
  NoGradGuard guard;
  const int yh = static_cast<int>(h.padded_height) / kDownsampling;
  const int yw = static_cast<int>(h.padded_width) / kDownsampling;
  const Shape zs{1, codec.config().channels, HyperSize(yh), HyperSize(yw)};
  const Shape ys{1, codec.config().latent_channels, yh, yw};
  const int z_support = static_cast<int>(h.hyper_support);
  const int y_support = static_cast<int>(h.latent_support);

  DecompressResult result;
  result.z_hat = FromSymbols(
      RangeDecode(stream.hyper_segment, HyperCdfs(codec, zs, z_support), zs.size()),
      zs, z_support);
  result.y_hat = FromSymbols(
      RangeDecode(stream.latent_segment,
                  LatentCdfs(codec, result.z_hat, yh, yw, y_support), ys.size()),
      ys, y_support);
  return result;
}

DecompressResult DecompressImage(const Codec& codec, const Bitstream& stream,
                                 const PreferenceCondition& beta) {
  DecompressResult result = DecodeLatents(codec, stream);
  result.image = CropImage(codec.DecodeImage(result.y_hat, beta),
                           static_cast<int>(stream.header.height),
                           static_cast<int>(stream.header.width));
  return result;
}

}  // namespace ugicm
