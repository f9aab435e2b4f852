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

#include "ugicm/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ugicm/errors.h"

namespace ugicm {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.size()) {
    Fail(ErrorKind::kShapeMismatch, "tensor data size " +
                                        std::to_string(data_.size()) +
                                        " does not match shape " + shape.str());
  }
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::Add(const Tensor& other) {
  if (!(other.shape_ == shape_)) {
    Fail(ErrorKind::kShapeMismatch,
         "cannot add " + other.shape_.str() + " to " + shape_.str());
  }
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (shape.size() != size()) {
    Fail(ErrorKind::kShapeMismatch,
         "cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::Slice(int begin, int end) const {
  Shape s = shape_;
  s.n = end - begin;
  const size_t item = static_cast<size_t>(shape_.c) * shape_.plane();
  return Tensor(s, std::vector<double>(data_.begin() + begin * item,
                                       data_.begin() + end * item));
}

double Tensor::Sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::MaxAbs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor Stack(std::span<const Tensor> items) {
  if (items.empty()) return Tensor();
  Shape s = items[0].shape();
  s.n = 0;
  std::vector<double> values;
  for (const Tensor& t : items) {
    const Shape& ts = t.shape();
    if (ts.c != s.c || ts.h != s.h || ts.w != s.w) {
      Fail(ErrorKind::kShapeMismatch, "cannot stack " + ts.str());
    }
    s.n += ts.n;
    values.insert(values.end(), t.vec().begin(), t.vec().end());
  }
  return Tensor(s, std::move(values));
}

}  // namespace ugicm
