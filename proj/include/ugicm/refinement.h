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

#ifndef UGICM_REFINEMENT_H_
#define UGICM_REFINEMENT_H_

#include <cstdint>

#include "ugicm/embedding.h"
#include "ugicm/tensor.h"

namespace ugicm {

struct RefinementConfig {
  int steps = 10;
  double step_size = 1.0 / 255.0;
  double radius = 8.0 / 255.0;

  void Validate() const;
};

// Sign-gradient descent on 1 - cos(embed(candidate), embed(x)) starting from
// xhat. After every step the candidate is projected back into the L-infinity
// ball of `radius` around xhat and clamped to [0, 1]. Works on batches.
Tensor Refine(const Tensor& x, const Tensor& xhat, const RefinementConfig& config,
              const EmbeddingModel& model);

// Projects `candidate` onto {v : |v - center| <= radius} element-wise, with
// the bound holding exactly in floating point, then clamps to [0, 1].
void ProjectToBall(const Tensor& center, double radius, Tensor& candidate);

}  // namespace ugicm

#endif  // UGICM_REFINEMENT_H_
