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

#include "ugicm/c_api.h"

#include <algorithm>
#include <vector>

#include "ugicm/entropy_coder.h"
#include "ugicm/errors.h"

namespace {

using ugicm::ErrorKind;
using ugicm::SymbolCdf;

int StatusOf(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSymbolOutOfRange:
      return UGICM_SYMBOL_OUT_OF_RANGE;
    case ErrorKind::kCorruptStream:
      return UGICM_CORRUPT_STREAM;
    case ErrorKind::kInvalidConfig:
      return UGICM_INVALID_CDF;
    default:
      return UGICM_INVALID_ARGUMENT;
  }
}

// Expands the flat tables into one CDF per symbol (or a single shared one).
int Unflatten(const uint32_t* cdf_data, const uint32_t* cdf_lengths,
              size_t num_cdfs, const uint32_t* cdf_index, size_t count,
              std::vector<SymbolCdf>* out) {
  if (num_cdfs == 0 || cdf_data == nullptr || cdf_lengths == nullptr) {
    return UGICM_INVALID_ARGUMENT;
  }
  std::vector<SymbolCdf> tables(num_cdfs);
  size_t offset = 0;
  for (size_t i = 0; i < num_cdfs; ++i) {
    tables[i].cumulative.assign(cdf_data + offset, cdf_data + offset + cdf_lengths[i]);
    offset += cdf_lengths[i];
    try {
      tables[i].Validate();
    } catch (const ugicm::Error&) {
      return UGICM_INVALID_CDF;
    }
  }
  if (cdf_index == nullptr) {
    out->assign(1, tables[0]);
    return UGICM_OK;
  }
  out->clear();
  out->reserve(count);
  for (size_t k = 0; k < count; ++k) {
    if (cdf_index[k] >= num_cdfs) return UGICM_INVALID_ARGUMENT;
    out->push_back(tables[cdf_index[k]]);
  }
  if (count == 0) out->push_back(tables[0]);
  return UGICM_OK;
}

}  // namespace

extern "C" {

size_t ugicm_range_encode_bound(size_t count) { return 3 * count + 16; }

int ugicm_range_encode(const int32_t* symbols, size_t count,
                       const uint32_t* cdf_data, const uint32_t* cdf_lengths,
                       size_t num_cdfs, const uint32_t* cdf_index,
                       uint8_t* out, size_t out_capacity, size_t* out_length) {
  if ((count > 0 && symbols == nullptr) || out_length == nullptr) {
    return UGICM_INVALID_ARGUMENT;
  }
  std::vector<SymbolCdf> cdfs;
  if (int s = Unflatten(cdf_data, cdf_lengths, num_cdfs, cdf_index, count, &cdfs)) {
    return s;
  }
  try {
    const std::vector<uint8_t> bytes =
        ugicm::RangeEncode(std::span(symbols, count), cdfs);
    *out_length = bytes.size();
    if (bytes.size() > out_capacity) return UGICM_BUFFER_TOO_SMALL;
    std::copy(bytes.begin(), bytes.end(), out);
  } catch (const ugicm::Error& e) {
    return StatusOf(e.kind());
  }
  return UGICM_OK;
}

int ugicm_range_decode(const uint8_t* bytes, size_t length,
                       const uint32_t* cdf_data, const uint32_t* cdf_lengths,
                       size_t num_cdfs, const uint32_t* cdf_index,
                       size_t count, int32_t* out_symbols) {
  if ((length > 0 && bytes == nullptr) || (count > 0 && out_symbols == nullptr)) {
    return UGICM_INVALID_ARGUMENT;
  }
  std::vector<SymbolCdf> cdfs;
  if (int s = Unflatten(cdf_data, cdf_lengths, num_cdfs, cdf_index, count, &cdfs)) {
    return s;
  }
  try {
    const std::vector<int32_t> symbols =
        ugicm::RangeDecode(std::span(bytes, length), cdfs, count);
    std::copy(symbols.begin(), symbols.end(), out_symbols);
  } catch (const ugicm::Error& e) {
    return StatusOf(e.kind());
  }
  return UGICM_OK;
}

}  // extern "C"
