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

#ifndef UGICM_DIGEST_H_
#define UGICM_DIGEST_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ugicm {

// 64-bit FNV-1a, used for content and configuration digests.
class Fnv1a {
 public:
  void Update(std::span<const uint8_t> bytes);
  void Update(std::string_view text);
  void Update(std::span<const double> values);
  uint64_t value() const { return hash_; }

 private:
  uint64_t hash_ = 0xcbf29ce484222325ULL;
};

uint64_t DigestBytes(std::span<const uint8_t> bytes);
std::string DigestHex(uint64_t digest);

}  // namespace ugicm

#endif  // UGICM_DIGEST_H_
