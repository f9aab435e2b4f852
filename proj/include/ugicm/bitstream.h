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

#ifndef UGICM_BITSTREAM_H_
#define UGICM_BITSTREAM_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ugicm {

inline constexpr std::array<uint8_t, 4> kBitstreamMagic = {'U', 'G', 'I', 'C'};
inline constexpr uint16_t kBitstreamVersion = 1;

// Fixed-size little-endian header. The preference condition is deliberately
// absent: one stream serves both decode branches.
//
//   offset size field
//        0    4 magic "UGIC"
//        4    2 format version
//        6    4 original height
//       10    4 original width
//       14    4 padded height
//       18    4 padded width
//       22    8 codec config digest
//       30    4 latent symbol support K_y (symbols span [-K_y, K_y])
//       34    4 hyper-latent symbol support K_z
//       38    4 hyper-latent segment length in bytes
//       42    4 latent segment length in bytes
//       46      payload: hyper-latent segment, then latent segment
struct BitstreamHeader {
  uint16_t version = kBitstreamVersion;
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t padded_height = 0;
  uint32_t padded_width = 0;
  uint64_t config_digest = 0;
  uint32_t latent_support = 0;
  uint32_t hyper_support = 0;
  // Filled by pack; validated by unpack.
  std::array<uint32_t, 2> segment_lengths = {0, 0};

  bool operator==(const BitstreamHeader&) const = default;
};

inline constexpr size_t kBitstreamHeaderSize = 46;

struct Bitstream {
  BitstreamHeader header;
  std::vector<uint8_t> hyper_segment;
  std::vector<uint8_t> latent_segment;

  size_t payload_bytes() const {
    return hyper_segment.size() + latent_segment.size();
  }
};

// Serializes the header (with lengths taken from the segments) and payload.
std::vector<uint8_t> PackBitstream(const Bitstream& stream);
// Throws kBadMagic, kVersionUnsupported or kLengthMismatch.
Bitstream UnpackBitstream(std::span<const uint8_t> bytes);

}  // namespace ugicm

#endif  // UGICM_BITSTREAM_H_
