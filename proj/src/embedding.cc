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

#include "ugicm/embedding.h"

#include <cmath>
#include <sstream>

#include "ugicm/errors.h"
#include "ugicm/ops.h"
#include "ugicm/rng.h"
#include "ugicm/vit.h"

namespace ugicm {

std::string PreprocessSpec::Describe() const {
  std::ostringstream out;
  out.precision(17);
  out << resize << " " << resolution << "x" << resolution << " mean=" << mean[0]
      << "," << mean[1] << "," << mean[2] << " std=" << stdev[0] << "," << stdev[1]
      << "," << stdev[2];
  return out.str();
}

Var EmbeddingModel::Preprocess(const Var& images) const {
  const Shape s = images.shape();
  if (s.c != 3) Fail(ErrorKind::kShapeMismatch, "embedding input needs 3 channels");
  const int r = preprocess_.resolution;
  Var x = (s.h == r && s.w == r) ? images : ResizeBilinear(images, r, r);
  return NormalizeChannels(x, preprocess_.mean, preprocess_.stdev);
}

Var EmbeddingModel::Embed(const Var& images) const {
  return L2Normalize(Features(Preprocess(images)));
}

TinyBackbone::TinyBackbone(uint64_t seed)
    : EmbeddingModel(PreprocessSpec{.resolution = 32}) {
  Rng rng(seed);
  const int widths[] = {3, 16, 32, 64};
  for (int i = 0; i < 3; ++i) {
    Layer layer{Tensor(Shape{widths[i + 1], widths[i], 3, 3}),
                Tensor(Shape{1, widths[i + 1], 1, 1})};
    const double bound = std::sqrt(6.0 / (widths[i] * 9));
    for (double& v : layer.weight.values()) v = rng.Uniform(-bound, bound);
    for (double& v : layer.bias.values()) v = rng.Uniform(-0.1, 0.1);
    layers_.push_back(std::move(layer));
  }
}

Var TinyBackbone::Features(const Var& preprocessed) const {
  Var h = preprocessed;
  for (size_t i = 0; i < layers_.size(); ++i) {
    h = Conv2d(h, Var::Constant(layers_[i].weight), Var::Constant(layers_[i].bias),
               2, 1);
    if (i + 1 < layers_.size()) h = Tanh(h);
  }
  return GlobalAvgPool(h);
}

std::unique_ptr<EmbeddingModel> MakeEmbeddingModel(const std::string& name,
                                                   const std::string& weights_path) {
  if (name == "tiny-test") {
    return std::make_unique<TinyBackbone>();
  }
  if (name == "clip-vit-b32") {
    if (weights_path.empty()) {
      Fail(ErrorKind::kNotFound, "clip-vit-b32 needs a weights file");
    }
    return LoadVisionTransformer(weights_path);
  }
  Fail(ErrorKind::kNotFound, "unknown embedding backbone '" + name + "'");
}

std::vector<std::string> EmbeddingModelNames() { return {"tiny-test", "clip-vit-b32"}; }

}  // namespace ugicm
