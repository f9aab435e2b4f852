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

#include "ugicm/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "ugicm/image_io.h"
#include "ugicm/rng.h"

namespace ugicm {
namespace {

using Color = std::array<double, 3>;

Color RandomColor(Rng& rng) { return {rng.Uniform(), rng.Uniform(), rng.Uniform()}; }

bool Inside(int kind, double y, double x, const std::array<double, 6>& g) {
  switch (kind) {
    case 0:  // axis-aligned rectangle: top, left, bottom, right
      return y >= g[0] && y < g[2] && x >= g[1] && x < g[3];
    case 1: {  // ellipse: cy, cx, ry, rx
      const double dy = (y - g[0]) / g[2], dx = (x - g[1]) / g[3];
      return dy * dy + dx * dx <= 1.0;
    }
    default: {  // triangle with vertices (g0,g1), (g2,g3), (g4,g5)
      auto side = [&](double ay, double ax, double by, double bx) {
        return (bx - ax) * (y - ay) - (by - ay) * (x - ax);
      };
      const double d1 = side(g[0], g[1], g[2], g[3]);
      const double d2 = side(g[2], g[3], g[4], g[5]);
      const double d3 = side(g[4], g[5], g[0], g[1]);
      return (d1 >= 0 && d2 >= 0 && d3 >= 0) || (d1 <= 0 && d2 <= 0 && d3 <= 0);
    }
  }
}

}  // namespace

Tensor SyntheticImage(int height, int width, uint64_t seed) {
  Rng rng(seed);
  Tensor img(Shape{1, 3, height, width});
  const Color a = RandomColor(rng), b = RandomColor(rng);
  const double angle = rng.Uniform(0, 2 * std::numbers::pi);
  const double freq = rng.Uniform(0.05, 0.4), amp = rng.Uniform(0.0, 0.15);
  const double fy = std::cos(angle), fx = std::sin(angle);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double t = 0.5 + 0.5 * (fy * (i - height / 2.0) + fx * (j - width / 2.0)) /
                                 (0.5 * std::hypot(height, width));
      const double wave = amp * std::sin(freq * (fx * i - fy * j));
      for (int c = 0; c < 3; ++c) img.at(0, c, i, j) = (1 - t) * a[c] + t * b[c] + wave;
    }
  }

  const int objects = 1 + static_cast<int>(rng.Below(4));
  for (int k = 0; k < objects; ++k) {
    const int kind = static_cast<int>(rng.Below(3));
    const double size = rng.Uniform(0.12, 0.4) * std::min(height, width);
    const double cy = rng.Uniform(0, height), cx = rng.Uniform(0, width);
    std::array<double, 6> g{};
    if (kind == 0) {
      const double h = size * rng.Uniform(0.5, 1.5), w = size * rng.Uniform(0.5, 1.5);
      g = {cy - h / 2, cx - w / 2, cy + h / 2, cx + w / 2, 0, 0};
    } else if (kind == 1) {
      g = {cy, cx, size * rng.Uniform(0.3, 0.8), size * rng.Uniform(0.3, 0.8), 0, 0};
    } else {
      for (int v = 0; v < 3; ++v) {
        g[2 * v] = cy + rng.Uniform(-size, size) * 0.7;
        g[2 * v + 1] = cx + rng.Uniform(-size, size) * 0.7;
      }
    }
    const Color base = RandomColor(rng);
    const double shade = rng.Uniform(-0.3, 0.3);
    const double stripes = rng.Below(3) == 0 ? rng.Uniform(0.3, 1.2) : 0.0;
    for (int i = 0; i < height; ++i) {
      for (int j = 0; j < width; ++j) {
        if (!Inside(kind, i + 0.5, j + 0.5, g)) continue;
        const double s = shade * (i - cy) / size +
                         (stripes > 0 ? 0.15 * std::sin(stripes * (i + j)) : 0.0);
        for (int c = 0; c < 3; ++c) img.at(0, c, i, j) = base[c] + s;
      }
    }
  }
  for (double& v : img.values()) v = std::clamp(v + 0.02 * rng.Normal(), 0.0, 1.0);
  return QuantizeTo8Bit(img);
}

DatasetManifest GenerateSyntheticDataset(const std::string& dir, const SynthSpec& spec) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.root = dir;
  m.seed = spec.seed;
  Rng seeds(spec.seed);
  const std::pair<const char*, int> splits[] = {
      {"train", spec.train}, {"val", spec.val}, {"test", spec.test}};
  for (const auto& [split, count] : splits) {
    for (int i = 0; i < count; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%05d.png", split, i);
      WritePng((std::filesystem::path(dir) / name).string(),
               SyntheticImage(spec.height, spec.width, seeds.Next()));
      m.entries.push_back(DescribeImage(dir, name, split));
    }
  }
  WriteManifest(m);
  return m;
}

}  // namespace ugicm
