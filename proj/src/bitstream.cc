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

#include "ugicm/bitstream.h"

#include <algorithm>
#include <string>

#include "ugicm/errors.h"

namespace ugicm {
namespace {

template <typename T>
void PutLe(std::vector<uint8_t>& out, T value) {
  for (size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T GetLe(std::span<const uint8_t> bytes, size_t offset) {
  T value = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[offset + i]) << (8 * i);
  }
  return value;
}

}  // namespace

std::vector<uint8_t> PackBitstream(const Bitstream& stream) {
  const BitstreamHeader& h = stream.header;
  std::vector<uint8_t> out(kBitstreamMagic.begin(), kBitstreamMagic.end());
  out.reserve(kBitstreamHeaderSize + stream.payload_bytes());
  PutLe<uint16_t>(out, h.version);
  PutLe<uint32_t>(out, h.height);
  PutLe<uint32_t>(out, h.width);
  PutLe<uint32_t>(out, h.padded_height);
  PutLe<uint32_t>(out, h.padded_width);
  PutLe<uint64_t>(out, h.config_digest);
  PutLe<uint32_t>(out, h.latent_support);
  PutLe<uint32_t>(out, h.hyper_support);
  PutLe<uint32_t>(out, static_cast<uint32_t>(stream.hyper_segment.size()));
  PutLe<uint32_t>(out, static_cast<uint32_t>(stream.latent_segment.size()));
  out.insert(out.end(), stream.hyper_segment.begin(), stream.hyper_segment.end());
  out.insert(out.end(), stream.latent_segment.begin(), stream.latent_segment.end());
  return out;
}

Bitstream UnpackBitstream(std::span<const uint8_t> bytes) {
  if (bytes.size() < kBitstreamMagic.size() ||
      !std::equal(kBitstreamMagic.begin(), kBitstreamMagic.end(), bytes.begin())) {
    Fail(ErrorKind::kBadMagic, "not a UGIC bitstream");
  }
  if (bytes.size() < kBitstreamHeaderSize) {
    Fail(ErrorKind::kLengthMismatch, "bitstream shorter than its header");
  }
  Bitstream stream;
  BitstreamHeader& h = stream.header;
  h.version = GetLe<uint16_t>(bytes, 4);
  if (h.version != kBitstreamVersion) {
    Fail(ErrorKind::kVersionUnsupported,
         "bitstream version " + std::to_string(h.version) + " is not supported");
  }
  h.height = GetLe<uint32_t>(bytes, 6);
  h.width = GetLe<uint32_t>(bytes, 10);
  h.padded_height = GetLe<uint32_t>(bytes, 14);
  h.padded_width = GetLe<uint32_t>(bytes, 18);
  h.config_digest = GetLe<uint64_t>(bytes, 22);
  h.latent_support = GetLe<uint32_t>(bytes, 30);
  h.hyper_support = GetLe<uint32_t>(bytes, 34);
  h.segment_lengths = {GetLe<uint32_t>(bytes, 38), GetLe<uint32_t>(bytes, 42)};
  const uint64_t expected = uint64_t{kBitstreamHeaderSize} +
                            h.segment_lengths[0] + h.segment_lengths[1];
  if (expected != bytes.size()) {
    Fail(ErrorKind::kLengthMismatch,
         "header declares " + std::to_string(expected) + " bytes, stream has " +
             std::to_string(bytes.size()));
  }
  const auto payload = bytes.subspan(kBitstreamHeaderSize);
  stream.hyper_segment.assign(payload.begin(),
                              payload.begin() + h.segment_lengths[0]);
  stream.latent_segment.assign(payload.begin() + h.segment_lengths[0], payload.end());
  return stream;
}

}  // namespace ugicm
