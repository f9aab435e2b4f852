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

#include "ugicm/image_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "ugicm/errors.h"

namespace ugicm {
namespace {

uint8_t ToByte(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Tensor ReadPng(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    Fail(ErrorKind::kIo, "cannot read PNG '" + path + "': " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    Fail(ErrorKind::kIo, "cannot decode PNG '" + path + "': " + img.message);
  }
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  Tensor out(Shape{1, 3, h, w});
  for (int c = 0; c < 3; ++c) {
    double* p = out.plane(0, c);
    for (int i = 0; i < h * w; ++i) p[i] = buffer[3 * i + c] / 255.0;
  }
  return out;
}

void WritePng(const std::string& path, const Tensor& image) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) Fail(ErrorKind::kShapeMismatch, "PNG needs one RGB image");
  std::vector<uint8_t> buffer(static_cast<size_t>(s.h) * s.w * 3);
  for (int c = 0; c < 3; ++c) {
    const double* p = image.plane(0, c);
    for (int i = 0; i < s.h * s.w; ++i) buffer[3 * i + c] = ToByte(p[i]);
  }
  const std::filesystem::path fp(path);
  if (fp.has_parent_path()) std::filesystem::create_directories(fp.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(s.w);
  img.height = static_cast<png_uint_32>(s.h);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    Fail(ErrorKind::kIo, "cannot write PNG '" + path + "': " + img.message);
  }
}

Tensor QuantizeTo8Bit(const Tensor& image) {
  Tensor out = image;
  for (double& v : out.values()) v = ToByte(v) / 255.0;
  return out;
}

}  // namespace ugicm
