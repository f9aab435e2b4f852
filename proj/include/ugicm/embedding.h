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

#ifndef UGICM_EMBEDDING_H_
#define UGICM_EMBEDDING_H_

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ugicm/autograd.h"
#include "ugicm/tensor.h"

namespace ugicm {

// How images are brought to the backbone's input: bilinear resize to a square
// resolution x resolution, then per-channel standardization.
struct PreprocessSpec {
  int resolution = 224;
  std::string resize = "bilinear";
  std::array<double, 3> mean = {0.48145466, 0.4578275, 0.40821073};
  std::array<double, 3> stdev = {0.26862954, 0.26130258, 0.27577711};

  std::string Describe() const;
};

// Frozen image-embedding backbone. Embed() is differentiable with respect to
// the input images and returns unit-norm vectors of shape (n, E, 1, 1).
class EmbeddingModel {
 public:
  virtual ~EmbeddingModel() = default;

  virtual std::string name() const = 0;
  virtual int dimension() const = 0;
  const PreprocessSpec& preprocess() const { return preprocess_; }

  // Images (n, 3, h, w) of any size in [0, 1].
  Var Embed(const Var& images) const;
  // Resizes and standardizes without running the backbone.
  Var Preprocess(const Var& images) const;
  // Backbone on preprocessed input (n, 3, R, R) -> unnormalized (n, E, 1, 1).
  virtual Var Features(const Var& preprocessed) const = 0;

 protected:
  explicit EmbeddingModel(PreprocessSpec preprocess)
      : preprocess_(std::move(preprocess)) {}

 private:
  PreprocessSpec preprocess_;
};

// Small fixed-seed convnet used in tests and toy runs: three 3x3 stride-2
// convolutions (3 -> 16 -> 32 -> 64) with tanh between them, then global
// average pooling. Input resolution 32, E = 64.
class TinyBackbone : public EmbeddingModel {
 public:
  static constexpr uint64_t kDefaultSeed = 0x7469'6e79;  // "tiny"

  explicit TinyBackbone(uint64_t seed = kDefaultSeed);

  std::string name() const override { return "tiny-test"; }
  int dimension() const override { return 64; }
  Var Features(const Var& preprocessed) const override;

  struct Layer {
    Tensor weight;
    Tensor bias;
  };
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<Layer> layers_;
};

// Registry: "tiny-test" (fixed seed, weights_path ignored) or
// "clip-vit-b32" (weights_path required). Throws kNotFound for unknown names.
std::unique_ptr<EmbeddingModel> MakeEmbeddingModel(const std::string& name,
                                                   const std::string& weights_path = "");
std::vector<std::string> EmbeddingModelNames();

}  // namespace ugicm

#endif  // UGICM_EMBEDDING_H_
