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

#ifndef UGICM_TENSOR_H_
#define UGICM_TENSOR_H_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ugicm {

// Dense NCHW shape. Vectors and matrices use trailing unit dimensions,
// e.g. a batch of embeddings is (n, e, 1, 1).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  size_t size() const {
    return static_cast<size_t>(n) * static_cast<size_t>(c) *
           static_cast<size_t>(h) * static_cast<size_t>(w);
  }
  size_t plane() const {
    return static_cast<size_t>(h) * static_cast<size_t>(w);
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Owning contiguous double-precision tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  double& at(int n, int c, int h, int w) { return data_[Index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const {
    return data_[Index(n, c, h, w)];
  }

  // Pointer to the (n, c) plane.
  double* plane(int n, int c) { return data_.data() + Index(n, c, 0, 0); }
  const double* plane(int n, int c) const {
    return data_.data() + Index(n, c, 0, 0);
  }

  void Fill(double v);
  // Adds `other` element-wise; shapes must match.
  void Add(const Tensor& other);
  Tensor Reshaped(Shape shape) const;
  // Copy of batch items [begin, end).
  Tensor Slice(int begin, int end) const;

  double Sum() const;
  double MaxAbs() const;
  bool AllFinite() const;

 private:
  size_t Index(int n, int c, int h, int w) const {
    return ((static_cast<size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w + w;
  }

  Shape shape_;
  std::vector<double> data_;
};

// Concatenates tensors along the batch dimension.
Tensor Stack(std::span<const Tensor> items);

}  // namespace ugicm

#endif  // UGICM_TENSOR_H_
