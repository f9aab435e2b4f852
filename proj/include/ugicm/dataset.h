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

#ifndef UGICM_DATASET_H_
#define UGICM_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ugicm/rng.h"
#include "ugicm/tensor.h"

namespace ugicm {

struct ManifestEntry {
  std::string file;  // relative to the manifest root
  int height = 0;
  int width = 0;
  uint64_t digest = 0;  // FNV-1a 64 of the file bytes
  std::string split;    // "train", "val" or "test"
};

inline constexpr char kManifestFile[] = "manifest.json";

struct DatasetManifest {
  std::string root;
  uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  // Entries of one split, in manifest order.
  std::vector<ManifestEntry> Split(const std::string& split) const;
  // Throws kInvalidConfig on unknown split tags or duplicate files.
  void Validate() const;
};

// Reads `dir`/manifest.json and checks every file's digest (kDigestMismatch).
// Without a manifest, every *.png in `dir` is listed, sorted by name, under
// the "test" split.
DatasetManifest LoadManifest(const std::string& dir);
void WriteManifest(const DatasetManifest& manifest);
// Digests and sizes the given files (relative to `root`).
ManifestEntry DescribeImage(const std::string& root, const std::string& file,
                            const std::string& split);

// Images of one split held in memory as 8-bit RGB.
class ImageSet {
 public:
  ImageSet() = default;
  ImageSet(const DatasetManifest& manifest, const std::string& split, int limit = 0);

  size_t size() const { return images_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  // Full image i as (1, 3, h, w).
  Tensor Image(size_t i) const;
  // Random patch x patch crops (edge-padded if the image is smaller) with
  // random horizontal flips, stacked into (n, 3, patch, patch).
  Tensor Batch(const std::vector<size_t>& indices, int patch, Rng& rng) const;

 private:
  struct Pixels {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> rgb;  // planar, 3 x h x w
  };
  std::vector<Pixels> images_;
  std::vector<std::string> names_;
};

}  // namespace ugicm

#endif  // UGICM_DATASET_H_
