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

#include "ugicm/nn.h"

#include <cmath>

#include "ugicm/digest.h"
#include "ugicm/errors.h"
#include "ugicm/ops.h"

namespace ugicm {

ParameterStore::ParameterStore(const ParameterStore& other) { *this = other; }

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    Parameter& added = Add(p->name, p->value);
    added.frozen = p->frozen;
  }
  return *this;
}

Parameter& ParameterStore::Add(std::string name, Tensor init) {
  if (index_.contains(name)) {
    Fail(ErrorKind::kInvalidConfig, "duplicate parameter " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Tensor(init.shape());
  p->value = std::move(init);
  Parameter* raw = p.get();
  index_.emplace(raw->name, raw);
  params_.push_back(std::move(p));
  return *raw;
}

Parameter& ParameterStore::Get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    Fail(ErrorKind::kNotFound, "no parameter named " + std::string(name));
  }
  return *it->second;
}

const Parameter& ParameterStore::Get(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->Get(name);
}

bool ParameterStore::Contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

std::vector<Parameter*> ParameterStore::All() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::All() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterStore::WithPrefix(std::string_view prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p->name.starts_with(prefix)) out.push_back(p.get());
  }
  return out;
}

void ParameterStore::ZeroGrad() {
  for (auto& p : params_) p->grad.Fill(0.0);
}

void ParameterStore::SetFrozen(std::string_view prefix, bool frozen) {
  for (Parameter* p : WithPrefix(prefix)) p->frozen = frozen;
}

uint64_t ParameterStore::Digest(const std::vector<std::string>& prefixes) const {
  Fnv1a h;
  for (const auto& p : params_) {
    bool match = prefixes.empty();
    for (const auto& prefix : prefixes) match = match || p->name.starts_with(prefix);
    if (!match) continue;
    h.Update(p->name);
    h.Update(p->value.shape().str());
    h.Update(p->value.values());
  }
  return h.value();
}

Var Bind(Parameter& p) {
  Var v = Var::Leaf(p.value, !p.frozen);
  if (v.requires_grad()) v.node()->param = &p;
  return v;
}

Tensor UniformFanIn(Shape shape, int fan_in, Rng& rng) {
  Tensor t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.Uniform(-bound, bound);
  return t;
}

Parameter& AddOrGet(ParameterStore& store, const std::string& name, Shape shape,
                    int fan_in, Rng* rng) {
  if (rng != nullptr) return store.Add(name, UniformFanIn(shape, fan_in, *rng));
  Parameter& p = store.Get(name);
  if (p.value.shape() != shape) {
    Fail(ErrorKind::kShapeMismatch, name + " has shape " +
                                        p.value.shape().str() + ", expected " +
                                        shape.str());
  }
  return p;
}

Conv2dLayer::Conv2dLayer(ParameterStore& store, const std::string& name,
                         int in, int out, int kernel, int stride, Rng* rng)
    : stride_(stride), pad_(kernel / 2) {
  const int fan_in = in * kernel * kernel;
  weight_ = &AddOrGet(store, name + ".weight", Shape{out, in, kernel, kernel},
                      fan_in, rng);
  bias_ = &AddOrGet(store, name + ".bias", Shape{1, out, 1, 1}, fan_in, rng);
}

Var Conv2dLayer::Forward(const Var& x) const {
  return Conv2d(x, Bind(*weight_), Bind(*bias_), stride_, pad_);
}

ConvTranspose2dLayer::ConvTranspose2dLayer(ParameterStore& store,
                                           const std::string& name, int in,
                                           int out, int kernel, int stride,
                                           Rng* rng)
    : stride_(stride), pad_(kernel / 2), output_padding_(stride - 1) {
  const int fan_in = out * kernel * kernel;
  weight_ = &AddOrGet(store, name + ".weight", Shape{in, out, kernel, kernel},
                      fan_in, rng);
  bias_ = &AddOrGet(store, name + ".bias", Shape{1, out, 1, 1}, fan_in, rng);
}

Var ConvTranspose2dLayer::Forward(const Var& x) const {
  return ConvTranspose2d(x, Bind(*weight_), Bind(*bias_), stride_, pad_,
                         output_padding_);
}

LinearLayer::LinearLayer(ParameterStore& store, const std::string& name, int in,
                         int out, Rng* rng) {
  weight_ = &AddOrGet(store, name + ".weight", Shape{out, in, 1, 1}, in, rng);
  bias_ = &AddOrGet(store, name + ".bias", Shape{1, out, 1, 1}, in, rng);
}

Var LinearLayer::Forward(const Var& x) const {
  return Linear(x, Bind(*weight_), Bind(*bias_));
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Parameter* p : params_) {
    moments_[p->name] = Moments{Tensor(p->value.shape()), Tensor(p->value.shape())};
  }
}

void Adam::Step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params_) {
    if (p->frozen) continue;
    Moments& m = moments_.at(p->name);
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m.first[i] = config_.beta1 * m.first[i] + (1.0 - config_.beta1) * g;
      m.second[i] = config_.beta2 * m.second[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m.first[i] / c1;
      const double vhat = m.second[i] / c2;
      p->value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

void Adam::Restore(long long steps, std::map<std::string, Moments> moments) {
  for (Parameter* p : params_) {
    auto it = moments.find(p->name);
    if (it == moments.end() || it->second.first.shape() != p->value.shape()) {
      Fail(ErrorKind::kShapeMismatch, "optimizer state missing for " + p->name);
    }
  }
  steps_ = steps;
  moments_ = std::move(moments);
}

}  // namespace ugicm
