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

#ifndef UGICM_COMPRESSION_H_
#define UGICM_COMPRESSION_H_

#include "ugicm/bitstream.h"
#include "ugicm/codec.h"
#include "ugicm/tensor.h"

namespace ugicm {

struct CompressResult {
  Bitstream stream;
  Tensor y_hat;  // rounded latent that was coded
  Tensor z_hat;
  double estimated_bits = 0.0;  // rate model estimate for (y_hat, z_hat)
};

struct DecompressResult {
  Tensor image;  // (1, 3, height, width), clamped to [0, 1]
  Tensor y_hat;
  Tensor z_hat;
};

// encode -> round -> entropy-code. `image` is (1, 3, h, w) in [0, 1]; it is
// edge-padded to a multiple of 16 and the original size is recorded.
CompressResult CompressImage(const Codec& codec, const Tensor& image);

// Entropy-decodes the latents; throws kDigestMismatch when the stream was
// produced under a different codec configuration.
DecompressResult DecodeLatents(const Codec& codec, const Bitstream& stream);

// entropy-decode -> decode(., beta) -> crop to the original size.
DecompressResult DecompressImage(const Codec& codec, const Bitstream& stream,
                                 const PreferenceCondition& beta);

}  // namespace ugicm

#endif  // UGICM_COMPRESSION_H_
