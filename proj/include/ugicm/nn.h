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

#ifndef UGICM_NN_H_
#define UGICM_NN_H_

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ugicm/autograd.h"
#include "ugicm/rng.h"
#include "ugicm/tensor.h"

namespace ugicm {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;
};

// Owns parameters under canonical dotted names. Addresses are stable.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& Add(std::string name, Tensor init);
  Parameter& Get(std::string_view name);
  const Parameter& Get(std::string_view name) const;
  bool Contains(std::string_view name) const;

  // Parameters in insertion order.
  std::vector<Parameter*> All();
  std::vector<const Parameter*> All() const;
  std::vector<Parameter*> WithPrefix(std::string_view prefix);

  void ZeroGrad();
  void SetFrozen(std::string_view prefix, bool frozen);
  // Digest over names, shapes and values of parameters matching any prefix;
  // an empty prefix list covers everything.
  uint64_t Digest(const std::vector<std::string>& prefixes = {}) const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*, std::less<>> index_;
};

// Leaf bound to a parameter; gradients flow into Parameter::grad unless the
// parameter is frozen.
Var Bind(Parameter& p);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill.
Tensor UniformFanIn(Shape shape, int fan_in, Rng& rng);

// Creates `name` with a fan-in uniform init when `rng` is given, otherwise
// returns the existing parameter after checking its shape.
Parameter& AddOrGet(ParameterStore& store, const std::string& name, Shape shape,
                    int fan_in, Rng* rng);

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  // With `rng`, parameters are created and initialized; without, existing
  // parameters of the expected shape are looked up by name.
  Conv2dLayer(ParameterStore& store, const std::string& name, int in, int out,
              int kernel, int stride, Rng* rng);

  Var Forward(const Var& x) const;

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  int stride_ = 1;
  int pad_ = 0;
};

// Stride-s transposed convolution that exactly multiplies spatial size by s.
class ConvTranspose2dLayer {
 public:
  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(ParameterStore& store, const std::string& name, int in,
                       int out, int kernel, int stride, Rng* rng);

  Var Forward(const Var& x) const;

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  int stride_ = 2;
  int pad_ = 0;
  int output_padding_ = 0;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(ParameterStore& store, const std::string& name, int in, int out,
              Rng* rng);

  Var Forward(const Var& x) const;
  Parameter& weight() { return *weight_; }
  Parameter& bias() { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed parameter list. Frozen parameters are skipped.
class Adam {
 public:
  struct Moments {
    Tensor first;
    Tensor second;
  };

  Adam(std::vector<Parameter*> params, AdamConfig config);

  void Step();
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  double learning_rate() const { return config_.learning_rate; }
  long long steps() const { return steps_; }

  // Moment buffers by parameter name, for checkpointing.
  const std::map<std::string, Moments>& moments() const { return moments_; }
  void Restore(long long steps, std::map<std::string, Moments> moments);

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  long long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace ugicm

#endif  // UGICM_NN_H_
