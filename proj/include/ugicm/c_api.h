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

#ifndef UGICM_C_API_H_
#define UGICM_C_API_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

// Status codes returned by every entry point.
enum {
  UGICM_OK = 0,
  UGICM_SYMBOL_OUT_OF_RANGE = 1,
  UGICM_CORRUPT_STREAM = 2,
  UGICM_INVALID_CDF = 3,
  UGICM_BUFFER_TOO_SMALL = 4,
  UGICM_INVALID_ARGUMENT = 5,
};

// CDF tables are passed flat: `cdf_data` holds `num_cdfs` cumulative arrays
// back to back, the i-th having `cdf_lengths[i]` entries (alphabet size + 1).
// `cdf_index[k]` selects the table of symbol k; a null `cdf_index` means every
// symbol uses table 0.

// Upper bound on the encoded size of `count` symbols.
size_t ugicm_range_encode_bound(size_t count);

// Writes the payload to `out` (capacity `out_capacity`) and its length to
// `out_length`.
int ugicm_range_encode(const int32_t* symbols, size_t count,
                       const uint32_t* cdf_data, const uint32_t* cdf_lengths,
                       size_t num_cdfs, const uint32_t* cdf_index,
                       uint8_t* out, size_t out_capacity, size_t* out_length);

// Decodes `count` symbols into `out_symbols`.
int ugicm_range_decode(const uint8_t* bytes, size_t length,
                       const uint32_t* cdf_data, const uint32_t* cdf_lengths,
                       size_t num_cdfs, const uint32_t* cdf_index,
                       size_t count, int32_t* out_symbols);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // UGICM_C_API_H_
