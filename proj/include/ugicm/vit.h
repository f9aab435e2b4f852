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

#ifndef UGICM_VIT_H_
#define UGICM_VIT_H_

#include <memory>
#include <string>
#include <vector>

#include "ugicm/archive.h"
#include "ugicm/autograd.h"
#include "ugicm/embedding.h"

namespace ugicm {

// Token sequences are stored as (n, 1, tokens, width).

// (n, d, gh, gw) feature map -> (n, 1, gh * gw, d) tokens in raster order.
Var FeatureMapToTokens(const Var& x);
// Prepends `row` (1, 1, 1, d) to every sequence.
Var PrependRow(const Var& tokens, const Var& row);
// Adds a (1, 1, t, d) table to every sequence.
Var AddRows(const Var& tokens, const Var& table);
// Normalizes every token over its width; gamma, beta (1, 1, 1, d).
Var LayerNormRows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// x W^T + b per token; weight (1, 1, out, in), bias (1, 1, 1, out) or undefined.
Var LinearRows(const Var& x, const Var& weight, const Var& bias);
// Scaled dot-product self-attention on packed [q | k | v] tokens (n, 1, t, 3d).
Var MultiHeadAttention(const Var& qkv, int heads);
// x * sigmoid(1.702 x).
Var QuickGelu(const Var& x);
// Token `row` of every sequence as (n, d, 1, 1).
Var SelectRow(const Var& x, int row);

struct VitConfig {
  int resolution = 224;
  int patch = 32;
  int width = 768;
  int layers = 12;
  int heads = 12;
  int output_dim = 512;
};

// Vision transformer image tower with CLIP's parameter naming ("visual.*").
class VisionTransformer : public EmbeddingModel {
 public:
  VisionTransformer(const VitConfig& config, TensorArchive weights);

  std::string name() const override { return "clip-vit-b32"; }
  int dimension() const override { return config_.output_dim; }
  const VitConfig& config() const { return config_; }
  Var Features(const Var& preprocessed) const override;

  // Names and shapes of every tensor the loader expects.
  static std::vector<std::pair<std::string, Shape>> ExpectedTensors(const VitConfig& c);

 private:
  Var W(const std::string& name) const;

  VitConfig config_;
  TensorArchive weights_;
};

// Reads a weights archive whose metadata holds the VitConfig fields as JSON.
std::unique_ptr<VisionTransformer> LoadVisionTransformer(const std::string& path);

}  // namespace ugicm

#endif  // UGICM_VIT_H_
