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

#ifndef UGICM_ENTROPY_CODER_H_
#define UGICM_ENTROPY_CODER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ugicm {

inline constexpr int kCdfPrecisionBits = 16;
inline constexpr uint32_t kCdfTotal = uint32_t{1} << kCdfPrecisionBits;

// Quantized cumulative frequencies: cumulative[0] == 0,
// cumulative[alphabet_size] == 2^16, every symbol has frequency >= 1.
struct SymbolCdf {
  std::vector<uint32_t> cumulative;

  int alphabet_size() const { return static_cast<int>(cumulative.size()) - 1; }
  uint32_t start(int symbol) const { return cumulative[symbol]; }
  uint32_t frequency(int symbol) const {
    return cumulative[symbol + 1] - cumulative[symbol];
  }
  // Throws kInvalidConfig when the invariants do not hold.
  void Validate() const;
};

// Quantizes a probability vector to 16-bit frequencies, giving each symbol at
// least one count and the rounding remainder to the most probable symbol.
SymbolCdf QuantizePmf(std::span<const double> pmf);

// Discretized Gaussian over integer symbols -support..support; tail mass
// beyond the outer bin edges is folded into the two edge bins. Symbol index
// is value + support.
SymbolCdf GaussianCdf(double mean, double scale, int support);

// Carry-less range coder with a 64-bit state and 16-bit frequencies.
class RangeEncoder {
 public:
  RangeEncoder() = default;

  // Throws kSymbolOutOfRange when `symbol` is not in the alphabet.
  void Encode(int symbol, const SymbolCdf& cdf);
  // Flushes the state; the encoder must not be used afterwards.
  std::vector<uint8_t> Finish();

 private:
  void Put(uint32_t start, uint32_t frequency);

  uint64_t low_ = 0;
  uint64_t range_ = ~uint64_t{0};
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws kCorruptStream if `bytes` is shorter than the initial state.
  explicit RangeDecoder(std::span<const uint8_t> bytes);

  // Throws kCorruptStream on an impossible state or on reading past the end.
  int Decode(const SymbolCdf& cdf);
  // True when every input byte has been consumed.
  bool exhausted() const { return position_ == bytes_.size(); }

 private:
  uint8_t NextByte();

  std::span<const uint8_t> bytes_;
  size_t position_ = 0;
  uint64_t low_ = 0;
  uint64_t range_ = ~uint64_t{0};
  uint64_t code_ = 0;
};

// One CDF per symbol, or a single CDF shared by every symbol.
std::vector<uint8_t> RangeEncode(std::span<const int32_t> symbols,
                                 std::span<const SymbolCdf> cdfs);
std::vector<int32_t> RangeDecode(std::span<const uint8_t> bytes,
                                 std::span<const SymbolCdf> cdfs, size_t count);

// Ideal code length of `symbols` under the quantized model, in bits.
double ShannonBits(std::span<const int32_t> symbols,
                   std::span<const SymbolCdf> cdfs);

}  // namespace ugicm

#endif  // UGICM_ENTROPY_CODER_H_
