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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ugicm/entropy_coder.h"
#include "ugicm/rng.h"

namespace ugicm {
namespace {

struct FlatTables {
  std::vector<uint32_t> data;
  std::vector<uint32_t> lengths;
  std::vector<SymbolCdf> cdfs;

  void Add(const SymbolCdf& cdf) {
    data.insert(data.end(), cdf.cumulative.begin(), cdf.cumulative.end());
    lengths.push_back(static_cast<uint32_t>(cdf.cumulative.size()));
    cdfs.push_back(cdf);
  }
};

TEST(CApi, MatchesLibraryCoderByteForByte) {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    FlatTables tables;
    const int num_tables = 1 + static_cast<int>(rng.Below(5));
    for (int t = 0; t < num_tables; ++t) {
      tables.Add(GaussianCdf(rng.Uniform(-3, 3), rng.Uniform(0.05, 10.0),
                             1 + static_cast<int>(rng.Below(30))));
    }
    const size_t count = rng.Below(200);
    std::vector<uint32_t> index(count);
    std::vector<int32_t> symbols(count);
    std::vector<SymbolCdf> per_symbol;
    for (size_t k = 0; k < count; ++k) {
      index[k] = static_cast<uint32_t>(rng.Below(num_tables));
      per_symbol.push_back(tables.cdfs[index[k]]);
      symbols[k] = static_cast<int32_t>(rng.Below(per_symbol.back().alphabet_size()));
    }
    if (count == 0) per_symbol.push_back(tables.cdfs[0]);
    const std::vector<uint8_t> expected = RangeEncode(symbols, per_symbol);

    std::vector<uint8_t> out(ugicm_range_encode_bound(count));
    size_t length = 0;
    ASSERT_EQ(ugicm_range_encode(symbols.data(), count, tables.data.data(),
                                 tables.lengths.data(), tables.lengths.size(),
                                 index.data(), out.data(), out.size(), &length),
              UGICM_OK);
    out.resize(length);
    ASSERT_EQ(out, expected);

    std::vector<int32_t> decoded(count);
    ASSERT_EQ(ugicm_range_decode(out.data(), out.size(), tables.data.data(),
                                 tables.lengths.data(), tables.lengths.size(),
                                 index.data(), count, decoded.data()),
              UGICM_OK);
    ASSERT_EQ(decoded, symbols);
  }
}

TEST(CApi, SharedTableAndStatusCodes) {
  FlatTables tables;
  tables.Add(GaussianCdf(0.0, 1.0, 4));
  const std::vector<int32_t> symbols = {4, 3, 5, 4, 4, 0, 8};
  std::vector<uint8_t> out(ugicm_range_encode_bound(symbols.size()));
  size_t length = 0;
  ASSERT_EQ(ugicm_range_encode(symbols.data(), symbols.size(), tables.data.data(),
                               tables.lengths.data(), 1, nullptr, out.data(),
                               out.size(), &length),
            UGICM_OK);
  EXPECT_EQ(std::vector<uint8_t>(out.begin(), out.begin() + length),
            RangeEncode(symbols, tables.cdfs));

  std::vector<int32_t> decoded(symbols.size());
  EXPECT_EQ(ugicm_range_decode(out.data(), length / 2, tables.data.data(),
                               tables.lengths.data(), 1, nullptr, symbols.size(),
                               decoded.data()),
            UGICM_CORRUPT_STREAM);
  EXPECT_EQ(ugicm_range_encode(symbols.data(), symbols.size(), tables.data.data(),
                               tables.lengths.data(), 1, nullptr, out.data(), 2,
                               &length),
            UGICM_BUFFER_TOO_SMALL);

  const int32_t bad = 9;
  EXPECT_EQ(ugicm_range_encode(&bad, 1, tables.data.data(), tables.lengths.data(), 1,
                               nullptr, out.data(), out.size(), &length),
            UGICM_SYMBOL_OUT_OF_RANGE);

  std::vector<uint32_t> broken = tables.data;
  broken.back() -= 1;
  EXPECT_EQ(ugicm_range_encode(symbols.data(), symbols.size(), broken.data(),
                               tables.lengths.data(), 1, nullptr, out.data(),
                               out.size(), &length),
            UGICM_INVALID_CDF);
}

}  // namespace
}  // namespace ugicm
