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

#ifndef UGICM_AUTOGRAD_H_
#define UGICM_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <vector>

#include "ugicm/tensor.h"

namespace ugicm {

struct Parameter;

// A node of the dynamic reverse-mode graph. Parents are kept alive by their
// children, so dropping the last Var of a forward pass frees the graph.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  Parameter* param = nullptr;

  // Gradient buffer, zero-initialized on first access.
  Tensor& GradBuffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var Constant(Tensor value);
  // A leaf whose gradient can be read back after Backward().
  static Var Leaf(Tensor value, bool requires_grad = true);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  // Gradient accumulated by the last Backward(); zeros if none reached it.
  const Tensor& grad() const { return node_->GradBuffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op result. `backward` receives the result node, whose grad is
// populated, and must accumulate into the parents that require grad.
Var MakeResult(Tensor value, std::vector<Var> parents,
               std::function<void(Node&)> backward);

// Runs reverse-mode accumulation from a scalar. Parameter leaves add their
// gradient into Parameter::grad.
void Backward(const Var& scalar);

// Disables graph recording for the current thread within its scope.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

}  // namespace ugicm

#endif  // UGICM_AUTOGRAD_H_
