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

#include "ugicm/entropy_coder.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ugicm/errors.h"

namespace ugicm {
namespace {

constexpr uint64_t kTop = uint64_t{1} << 56;
constexpr uint64_t kBottom = uint64_t{1} << 48;

double NormalCdf(double t) {
  return 0.5 * std::erfc(-t * std::numbers::sqrt2 / 2.0);
}

const SymbolCdf& CdfFor(std::span<const SymbolCdf> cdfs, size_t i) {
  return cdfs.size() == 1 ? cdfs[0] : cdfs[i];
}

void CheckCdfCount(std::span<const SymbolCdf> cdfs, size_t count) {
  if (count > 0 && cdfs.size() != 1 && cdfs.size() != count) {
    Fail(ErrorKind::kShapeMismatch,
         "expected 1 or " + std::to_string(count) + " cdfs, got " +
             std::to_string(cdfs.size()));
  }
}

}  // namespace

void SymbolCdf::Validate() const {
  if (cumulative.size() < 2 || cumulative.front() != 0 ||
      cumulative.back() != kCdfTotal) {
    Fail(ErrorKind::kInvalidConfig, "cdf must run from 0 to 2^16");
  }
  for (size_t i = 1; i < cumulative.size(); ++i) {
    if (cumulative[i] <= cumulative[i - 1]) {
      Fail(ErrorKind::kInvalidConfig, "cdf symbol with zero frequency");
    }
  }
}

SymbolCdf QuantizePmf(std::span<const double> pmf) {
  const size_t n = pmf.size();
  if (n == 0 || n > kCdfTotal) {
    Fail(ErrorKind::kInvalidConfig, "alphabet size out of range");
  }
  double total = 0.0;
  for (double p : pmf) total += std::max(p, 0.0);
  const double budget = static_cast<double>(kCdfTotal - n);
  std::vector<uint32_t> freq(n, 1);
  size_t best = 0;
  uint64_t used = n;
  for (size_t i = 0; i < n; ++i) {
    const double p = total > 0.0 ? std::max(pmf[i], 0.0) / total : 1.0 / n;
    const auto extra = static_cast<uint32_t>(std::floor(p * budget));
    freq[i] += extra;
    used += extra;
    if (freq[i] > freq[best]) best = i;
  }
  if (used > kCdfTotal) {
    freq[best] -= static_cast<uint32_t>(used - kCdfTotal);
  } else {
    freq[best] += static_cast<uint32_t>(kCdfTotal - used);
  }
  SymbolCdf cdf;
  cdf.cumulative.resize(n + 1, 0);
  for (size_t i = 0; i < n; ++i) cdf.cumulative[i + 1] = cdf.cumulative[i] + freq[i];
  return cdf;
}

SymbolCdf GaussianCdf(double mean, double scale, int support) {
  const int alphabet = 2 * support + 1;
  std::vector<double> pmf(alphabet);
  double previous = 0.0;
  for (int i = 0; i < alphabet - 1; ++i) {
    const double edge = -support + i + 0.5;
    const double c = NormalCdf((edge - mean) / scale);
    pmf[i] = c - previous;
    previous = c;
  }
  pmf[alphabet - 1] = 1.0 - previous;
  return QuantizePmf(pmf);
}

void RangeEncoder::Put(uint32_t start, uint32_t frequency) {
  range_ >>= kCdfPrecisionBits;
  low_ += start * range_;
  range_ *= frequency;
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBottom && ((range_ = (0 - low_) & (kBottom - 1)), true))) {
    out_.push_back(static_cast<uint8_t>(low_ >> 56));
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeEncoder::Encode(int symbol, const SymbolCdf& cdf) {
  if (symbol < 0 || symbol >= cdf.alphabet_size()) {
    Fail(ErrorKind::kSymbolOutOfRange,
         "symbol " + std::to_string(symbol) + " outside alphabet of size " +
             std::to_string(cdf.alphabet_size()));
  }
  Put(cdf.start(symbol), cdf.frequency(symbol));
}

std::vector<uint8_t> RangeEncoder::Finish() {
  for (int i = 0; i < 8; ++i) {
    out_.push_back(static_cast<uint8_t>(low_ >> 56));
    low_ <<= 8;
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  if (bytes_.size() < 8) {
    Fail(ErrorKind::kCorruptStream, "range-coded payload shorter than 8 bytes");
  }
  for (int i = 0; i < 8; ++i) code_ = (code_ << 8) | NextByte();
}

uint8_t RangeDecoder::NextByte() {
  if (position_ >= bytes_.size()) {
    Fail(ErrorKind::kCorruptStream, "range-coded payload is truncated");
  }
  return bytes_[position_++];
}

int RangeDecoder::Decode(const SymbolCdf& cdf) {
  range_ >>= kCdfPrecisionBits;
  const uint64_t value = (code_ - low_) / range_;
  if (value >= kCdfTotal) {
    Fail(ErrorKind::kCorruptStream, "range decoder reached an impossible state");
  }
  const auto it = std::upper_bound(cdf.cumulative.begin(), cdf.cumulative.end(),
                                   static_cast<uint32_t>(value));
  const int symbol = static_cast<int>(it - cdf.cumulative.begin()) - 1;
  low_ += cdf.start(symbol) * range_;
  range_ *= cdf.frequency(symbol);
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBottom && ((range_ = (0 - low_) & (kBottom - 1)), true))) {
    code_ = (code_ << 8) | NextByte();
    low_ <<= 8;
    range_ <<= 8;
  }
  return symbol;
}

std::vector<uint8_t> RangeEncode(std::span<const int32_t> symbols,
                                 std::span<const SymbolCdf> cdfs) {
  CheckCdfCount(cdfs, symbols.size());
  RangeEncoder encoder;
  for (size_t i = 0; i < symbols.size(); ++i) {
    encoder.Encode(symbols[i], CdfFor(cdfs, i));
  }
  return encoder.Finish();
}

std::vector<int32_t> RangeDecode(std::span<const uint8_t> bytes,
                                 std::span<const SymbolCdf> cdfs, size_t count) {
  CheckCdfCount(cdfs, count);
  RangeDecoder decoder(bytes);
  std::vector<int32_t> out(count);
  for (size_t i = 0; i < count; ++i) out[i] = decoder.Decode(CdfFor(cdfs, i));
  if (!decoder.exhausted()) {
    Fail(ErrorKind::kCorruptStream, "trailing bytes after range-coded payload");
  }
  return out;
}

double ShannonBits(std::span<const int32_t> symbols,
                   std::span<const SymbolCdf> cdfs) {
  CheckCdfCount(cdfs, symbols.size());
  double bits = 0.0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const SymbolCdf& cdf = CdfFor(cdfs, i);
    bits += kCdfPrecisionBits - std::log2(static_cast<double>(cdf.frequency(symbols[i])));
  }
  return bits;
}

}  // namespace ugicm
