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

#include "ugicm/digest.h"

#include <cstdio>
#include <cstring>

namespace ugicm {

void Fnv1a::Update(std::span<const uint8_t> bytes) {
  for (uint8_t b : bytes) {
    hash_ ^= b;
    hash_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::Update(std::string_view text) {
  Update(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

void Fnv1a::Update(std::span<const double> values) {
  Update(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(values.data()), values.size_bytes()));
}

uint64_t DigestBytes(std::span<const uint8_t> bytes) {
  Fnv1a h;
  h.Update(bytes);
  return h.value();
}

std::string DigestHex(uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace ugicm
