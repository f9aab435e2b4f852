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

#ifndef UGICM_INSTANCES_H_
#define UGICM_INSTANCES_H_

#include <cstdint>
#include <vector>

#include "ugicm/tensor.h"

namespace ugicm {

struct InstanceBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  int area = 0;  // pixels in the component, not the box
  // Component membership inside the box, row-major height x width.
  std::vector<uint8_t> mask;

  bool operator==(const InstanceBox&) const = default;
};

// Sorted by descending area.
using InstanceMaskSet = std::vector<InstanceBox>;

// Deterministic contrast-based stand-in for an instance segmenter: pixels
// whose gray level differs from the local median by more than `threshold`
// are grouped into 8-connected components; the `max_instances` largest with
// at least `min_area` pixels are kept.
struct ProposalConfig {
  int max_instances = 8;
  int min_area = 16;
  double threshold = 0.2;
  // Median window side as a fraction of min(h, w); rounded to an odd size.
  double window_fraction = 0.5;
};

// `image` is (1, 3, h, w) in [0, 1].
InstanceMaskSet ProposeInstances(const Tensor& image, const ProposalConfig& config = {});

}  // namespace ugicm

#endif  // UGICM_INSTANCES_H_
