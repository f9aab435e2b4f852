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

#ifndef UGICM_IMAGE_IO_H_
#define UGICM_IMAGE_IO_H_

#include <string>

#include "ugicm/tensor.h"

namespace ugicm {

// 8-bit PNG <-> (1, 3, h, w) tensors in [0, 1]. Gray and alpha inputs are
// converted to RGB. Throws kIo.
Tensor ReadPng(const std::string& path);
void WritePng(const std::string& path, const Tensor& image);

// Rounds to the nearest 8-bit level, as a PNG round trip would.
Tensor QuantizeTo8Bit(const Tensor& image);

}  // namespace ugicm

#endif  // UGICM_IMAGE_IO_H_
