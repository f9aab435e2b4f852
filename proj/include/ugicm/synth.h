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

#ifndef UGICM_SYNTH_H_
#define UGICM_SYNTH_H_

#include <cstdint>
#include <string>

#include "ugicm/dataset.h"
#include "ugicm/tensor.h"

namespace ugicm {

// One synthetic scene: a smooth textured background with a few flat or
// shaded objects (rectangles, ellipses, triangles) and mild pixel noise.
Tensor SyntheticImage(int height, int width, uint64_t seed);

struct SynthSpec {
  int train = 2000;
  int val = 0;
  int test = 100;
  int height = 96;
  int width = 96;
  uint64_t seed = 0;
};

// Writes PNGs and a manifest to `dir` and returns the manifest.
DatasetManifest GenerateSyntheticDataset(const std::string& dir, const SynthSpec& spec);

}  // namespace ugicm

#endif  // UGICM_SYNTH_H_
