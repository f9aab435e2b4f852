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

#ifndef UGICM_CLIP_LOSS_H_
#define UGICM_CLIP_LOSS_H_

#include <cstdint>
#include <map>
#include <string>

#include "ugicm/autograd.h"
#include "ugicm/embedding.h"
#include "ugicm/instances.h"
#include "ugicm/rng.h"

namespace ugicm {

// Per-item cosine similarity of unit-norm embeddings (n, E, 1, 1) -> (n, 1, 1, 1).
Var CosineSimilarity(const Var& u, const Var& v);

struct CropSpec {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

// Square-ish crop whose sides are a fraction f ~ U[min_fraction, max_fraction]
// of the image sides, placed uniformly at random.
CropSpec RandomCrop(int height, int width, double min_fraction, double max_fraction,
                    Rng& rng);

// All losses below compare a reference batch x (treated as constant) with a
// reconstruction batch xhat of the same shape, and return the batch mean as a
// scalar (1, 1, 1, 1) differentiable with respect to xhat.

// 1 - cos(embed(x), embed(xhat)).
Var LossGlobal(const Var& x, const Var& xhat, const EmbeddingModel& model);
// Global loss on the same window cropped from both images; throws
// kCropOutOfBounds if the window does not fit.
Var LossLocal(const Var& x, const Var& xhat, const CropSpec& crop,
              const EmbeddingModel& model);
// Sum over boxes of 1 - cos on box crops padded to square. Boxes come from the
// reference image and are shared by both sides. `x` and `xhat` hold one image.
Var LossInstance(const Var& x, const Var& xhat, const InstanceMaskSet& masks,
                 const EmbeddingModel& model, bool mask_background = false);

struct MsClipConfig {
  double min_crop_fraction = 0.2;
  double max_crop_fraction = 0.5;
  double weight_global = 1.0;
  double weight_local = 1.0;
  double weight_instance = 1.0;
  bool mask_background = false;
  std::string segmenter = "contrast";
  ProposalConfig proposals;

  void Validate() const;
};

// Instance proposals keyed by image content, so each reference image is
// segmented once.
class InstanceCache {
 public:
  // The cache is emptied whenever it would exceed `capacity` entries.
  explicit InstanceCache(size_t capacity = 1 << 16) : capacity_(capacity) {}
  const InstanceMaskSet& Get(const Tensor& image, const ProposalConfig& config);
  size_t size() const { return cache_.size(); }

 private:
  size_t capacity_;
  std::map<uint64_t, InstanceMaskSet> cache_;
};

// Weighted sum of the global, local and instance terms, averaged over the
// batch. Draws one local crop per image from `rng`.
Var LossMsClip(const Var& x, const Var& xhat, const MsClipConfig& config,
               const EmbeddingModel& model, Rng& rng, InstanceCache* cache = nullptr);

}  // namespace ugicm

#endif  // UGICM_CLIP_LOSS_H_
