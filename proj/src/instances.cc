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

#include "ugicm/instances.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "ugicm/errors.h"

namespace ugicm {
namespace {

constexpr int kLevels = 256;

// Median of a clamped square window around every pixel, computed with a
// sliding histogram over 8-bit gray levels.
std::vector<int> LocalMedian(const std::vector<int>& gray, int h, int w, int radius) {
  std::vector<int> median(gray.size());
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
    std::array<int, kLevels> hist{};
    int count = 0;
    auto add_column = [&](int x, int sign) {
      for (int yy = y0; yy <= y1; ++yy) hist[gray[yy * w + x]] += sign;
      count += sign * (y1 - y0 + 1);
    };
    for (int x = 0; x <= std::min(w - 1, radius); ++x) add_column(x, 1);
    for (int x = 0; x < w; ++x) {
      if (x > 0) {
        if (x - radius - 1 >= 0) add_column(x - radius - 1, -1);
        if (x + radius < w) add_column(x + radius, 1);
      }
      // Lower median.
      const int target = (count + 1) / 2;
      int seen = 0, level = 0;
      for (; level < kLevels; ++level) {
        seen += hist[level];
        if (seen >= target) break;
      }
      median[y * w + x] = level;
    }
  }
  return median;
}

}  // namespace

InstanceMaskSet ProposeInstances(const Tensor& image, const ProposalConfig& config) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) {
    Fail(ErrorKind::kShapeMismatch, "proposals take one RGB image, got " + s.str());
  }
  const int h = s.h, w = s.w;
  std::vector<int> gray(static_cast<size_t>(h) * w);
  for (int i = 0; i < h * w; ++i) {
    const double g = (image.plane(0, 0)[i] + image.plane(0, 1)[i] + image.plane(0, 2)[i]) / 3.0;
    gray[i] = std::clamp(static_cast<int>(std::lround(g * (kLevels - 1))), 0, kLevels - 1);
  }
  const int window = std::max(
      1, static_cast<int>(std::lround(config.window_fraction * std::min(h, w))) | 1);
  const std::vector<int> median = LocalMedian(gray, h, w, window / 2);

  std::vector<uint8_t> fg(gray.size());
  for (size_t i = 0; i < gray.size(); ++i) {
    fg[i] = std::abs(gray[i] - median[i]) > config.threshold * (kLevels - 1);
  }

  std::vector<int> label(gray.size(), -1);
  std::vector<int> stack;
  InstanceMaskSet found;
  for (int start = 0; start < h * w; ++start) {
    if (!fg[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(found.size());
    std::vector<int> members;
    stack.assign(1, start);
    label[start] = id;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int py = p / w, px = p % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = py + dy, nx = px + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int q = ny * w + nx;
          if (fg[q] && label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    InstanceBox box;
    int bottom = 0, right = 0;
    box.top = h;
    box.left = w;
    for (int p : members) {
      box.top = std::min(box.top, p / w);
      box.left = std::min(box.left, p % w);
      bottom = std::max(bottom, p / w);
      right = std::max(right, p % w);
    }
    box.height = bottom - box.top + 1;
    box.width = right - box.left + 1;
    box.area = static_cast<int>(members.size());
    box.mask.assign(static_cast<size_t>(box.height) * box.width, 0);
    for (int p : members) {
      box.mask[(p / w - box.top) * box.width + (p % w - box.left)] = 1;
    }
    found.push_back(std::move(box));
  }

  std::erase_if(found, [&](const InstanceBox& b) { return b.area < config.min_area; });
  std::stable_sort(found.begin(), found.end(),
                   [](const InstanceBox& a, const InstanceBox& b) { return a.area > b.area; });
  if (static_cast<int>(found.size()) > config.max_instances) {
    found.resize(std::max(0, config.max_instances));
  }
  return found;
}

}  // namespace ugicm
