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

#include "ugicm/clip_loss.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ugicm/digest.h"
#include "ugicm/errors.h"
#include "ugicm/ops.h"

namespace ugicm {
namespace {

void RequireSameShape(const Var& x, const Var& xhat) {
  if (x.shape() != xhat.shape()) {
    Fail(ErrorKind::kShapeMismatch,
         "loss inputs differ: " + x.shape().str() + " vs " + xhat.shape().str());
  }
}

Var ReferenceEmbedding(const Var& x, const EmbeddingModel& model) {
  NoGradGuard guard;
  return Var::Constant(model.Embed(Var::Constant(x.value())).value());
}

// 1 - cos per item, averaged over the batch.
Var MeanDissimilarity(const Var& reference, const Var& candidate) {
  const Var cos = CosineSimilarity(reference, candidate);
  return AddScalar(Scale(Mean(cos), -1.0), 1.0);
}

// Crops a box and pads it to a square; background pixels are zeroed when a
// mask is given.
Var BoxCrop(const Var& image, const InstanceBox& box, bool mask_background) {
  Var crop = Crop(image, box.top, box.left, box.height, box.width);
  if (mask_background) {
    Tensor mask(crop.shape());
    for (int c = 0; c < 3; ++c) {
      double* p = mask.plane(0, c);
      for (size_t i = 0; i < box.mask.size(); ++i) p[i] = box.mask[i];
    }
    crop = Mul(crop, Var::Constant(mask));
  }
  const int side = std::max(box.height, box.width);
  const int pad_h = side - box.height, pad_w = side - box.width;
  if (pad_h == 0 && pad_w == 0) return crop;
  return Pad(crop, pad_h / 2, pad_h - pad_h / 2, pad_w / 2, pad_w - pad_w / 2, 0.0);
}

}  // namespace

Var CosineSimilarity(const Var& u, const Var& v) { return Dot(u, v); }

CropSpec RandomCrop(int height, int width, double min_fraction, double max_fraction,
                    Rng& rng) {
  const double f = rng.Uniform(min_fraction, max_fraction);
  CropSpec crop;
  crop.height = std::clamp(static_cast<int>(std::lround(f * height)), 1, height);
  crop.width = std::clamp(static_cast<int>(std::lround(f * width)), 1, width);
  crop.top = static_cast<int>(rng.Below(height - crop.height + 1));
  crop.left = static_cast<int>(rng.Below(width - crop.width + 1));
  return crop;
}

Var LossGlobal(const Var& x, const Var& xhat, const EmbeddingModel& model) {
  RequireSameShape(x, xhat);
  return MeanDissimilarity(ReferenceEmbedding(x, model), model.Embed(xhat));
}

Var LossLocal(const Var& x, const Var& xhat, const CropSpec& crop,
              const EmbeddingModel& model) {
  RequireSameShape(x, xhat);
  return LossGlobal(Crop(x, crop.top, crop.left, crop.height, crop.width),
                    Crop(xhat, crop.top, crop.left, crop.height, crop.width), model);
}

Var LossInstance(const Var& x, const Var& xhat, const InstanceMaskSet& masks,
                 const EmbeddingModel& model, bool mask_background) {
  RequireSameShape(x, xhat);
  if (x.shape().n != 1) {
    Fail(ErrorKind::kShapeMismatch, "instance loss takes one image at a time");
  }
  if (masks.empty()) return Var::Constant(Tensor(Shape{1, 1, 1, 1}));
  const int r = model.preprocess().resolution;
  std::vector<Var> ref, cand;
  for (const InstanceBox& box : masks) {
    ref.push_back(ResizeBilinear(BoxCrop(x, box, mask_background), r, r));
    cand.push_back(ResizeBilinear(BoxCrop(xhat, box, mask_background), r, r));
  }
  const Var cos = CosineSimilarity(ReferenceEmbedding(ConcatBatch(ref), model),
                                   model.Embed(ConcatBatch(cand)));
  return AddScalar(Scale(Sum(cos), -1.0), static_cast<double>(masks.size()));
}

void MsClipConfig::Validate() const {
  if (!(min_crop_fraction > 0.0 && min_crop_fraction <= max_crop_fraction &&
        max_crop_fraction <= 1.0)) {
    Fail(ErrorKind::kInvalidConfig, "crop fractions must satisfy 0 < min <= max <= 1");
  }
  if (weight_global < 0.0 || weight_local < 0.0 || weight_instance < 0.0) {
    Fail(ErrorKind::kInvalidConfig, "MS-CLIP term weights must be non-negative");
  }
  if (segmenter != "contrast") {
    Fail(ErrorKind::kInvalidConfig, "unknown segmenter '" + segmenter + "'");
  }
  if (proposals.max_instances < 0) {
    Fail(ErrorKind::kInvalidConfig, "instance cap must be non-negative");
  }
}

const InstanceMaskSet& InstanceCache::Get(const Tensor& image,
                                          const ProposalConfig& config) {
  Fnv1a h;
  h.Update(image.shape().str());
  h.Update(image.values());
  h.Update(std::span<const double>(
      std::array<double, 4>{static_cast<double>(config.max_instances),
                            static_cast<double>(config.min_area), config.threshold,
                            config.window_fraction}));
  const uint64_t key = h.value();
  auto it = cache_.find(key);
  if (it == cache_.end() && cache_.size() >= capacity_) cache_.clear();
  if (it == cache_.end()) it = cache_.emplace(key, ProposeInstances(image, config)).first;
  return it->second;
}

Var LossMsClip(const Var& x, const Var& xhat, const MsClipConfig& config,
               const EmbeddingModel& model, Rng& rng, InstanceCache* cache) {
  RequireSameShape(x, xhat);
  config.Validate();
  const Shape s = x.shape();
  InstanceCache local_cache;
  if (cache == nullptr) cache = &local_cache;

  std::vector<CropSpec> crops;
  for (int i = 0; i < s.n; ++i) {
    crops.push_back(RandomCrop(s.h, s.w, config.min_crop_fraction,
                               config.max_crop_fraction, rng));
  }

  Var total = Var::Constant(Tensor(Shape{1, 1, 1, 1}));
  if (config.weight_global > 0.0) {
    total = Add(total, Scale(LossGlobal(x, xhat, model), config.weight_global));
  }
  for (int i = 0; i < s.n; ++i) {
    const Var xi = SelectItem(x, i);
    const Var xhi = SelectItem(xhat, i);
    Var item = Var::Constant(Tensor(Shape{1, 1, 1, 1}));
    if (config.weight_local > 0.0) {
      item = Add(item, Scale(LossLocal(xi, xhi, crops[i], model), config.weight_local));
    }
    if (config.weight_instance > 0.0) {
      const InstanceMaskSet& masks = cache->Get(xi.value(), config.proposals);
      item = Add(item, Scale(LossInstance(xi, xhi, masks, model, config.mask_background),
                             config.weight_instance));
    }
    total = Add(total, Scale(item, 1.0 / s.n));
  }
  return total;
}

}  // namespace ugicm
