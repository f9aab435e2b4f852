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

#include "ugicm/refinement.h"

#include <algorithm>
#include <cmath>

#include "ugicm/clip_loss.h"
#include "ugicm/errors.h"
#include "ugicm/ops.h"

namespace ugicm {

void RefinementConfig::Validate() const {
  if (steps < 0) Fail(ErrorKind::kInvalidConfig, "refinement steps must be >= 0");
  if (steps > 0 && !(step_size > 0.0)) {
    Fail(ErrorKind::kInvalidConfig, "refinement step size must be > 0");
  }
  if (!(radius >= 0.0)) Fail(ErrorKind::kInvalidConfig, "refinement radius must be >= 0");
}

void ProjectToBall(const Tensor& center, double radius, Tensor& candidate) {
  for (size_t i = 0; i < candidate.size(); ++i) {
    const double c = center[i];
    double v = c + std::clamp(candidate[i] - c, -radius, radius);
    // c + d can round outside the ball; step back one ulp at a time.
    while (v - c > radius) v = std::nextafter(v, -INFINITY);
    while (c - v > radius) v = std::nextafter(v, INFINITY);
    candidate[i] = std::clamp(v, 0.0, 1.0);
  }
}

Tensor Refine(const Tensor& x, const Tensor& xhat, const RefinementConfig& config,
              const EmbeddingModel& model) {
  config.Validate();
  if (x.shape() != xhat.shape()) {
    Fail(ErrorKind::kShapeMismatch,
         "refine: " + x.shape().str() + " vs " + xhat.shape().str());
  }
  Tensor current = xhat;
  for (int t = 0; t < config.steps; ++t) {
    const Var leaf = Var::Leaf(current);
    Backward(LossGlobal(Var::Constant(x), leaf, model));
    const Tensor& g = leaf.grad();
    for (size_t i = 0; i < current.size(); ++i) {
      current[i] -= config.step_size * static_cast<double>((g[i] > 0) - (g[i] < 0));
    }
    ProjectToBall(xhat, config.radius, current);
  }
  return current;
}

}  // namespace ugicm
