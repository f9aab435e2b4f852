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

#include "ugicm/autograd.h"

#include <unordered_set>
#include <utility>

#include "ugicm/errors.h"
#include "ugicm/nn.h"

namespace ugicm {
namespace {

thread_local bool grad_enabled = true;

}  // namespace

Tensor& Node::GradBuffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

Var Var::Constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::Leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad && grad_enabled;
  return Var(std::move(node));
}

Var MakeResult(Tensor value, std::vector<Var> parents,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const Var& p : parents) any = any || p.requires_grad();
  if (any && grad_enabled) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->parents.reserve(parents.size());
    for (const Var& p : parents) node->parents.push_back(p.shared());
  }
  return Var(std::move(node));
}

void Backward(const Var& scalar) {
  if (scalar.value().size() != 1) {
    Fail(ErrorKind::kShapeMismatch,
         "Backward() needs a scalar, got " + scalar.shape().str());
  }
  if (!scalar.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(scalar.node(), 0);
  visited.insert(scalar.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  scalar.node()->GradBuffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->grad.empty()) continue;
    if (node->backward) node->backward(*node);
    if (node->param != nullptr) node->param->grad.Add(node->grad);
  }
}

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

bool GradEnabled() { return grad_enabled; }

}  // namespace ugicm
