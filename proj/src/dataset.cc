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

#include "ugicm/dataset.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <set>

#include "ugicm/archive.h"
#include "ugicm/digest.h"
#include "ugicm/errors.h"
#include "ugicm/image_io.h"

namespace ugicm {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ManifestEntry> DatasetManifest::Split(const std::string& split) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

void DatasetManifest::Validate() const {
  std::set<std::string> seen;
  for (const ManifestEntry& e : entries) {
    if (e.split != "train" && e.split != "val" && e.split != "test") {
      Fail(ErrorKind::kInvalidConfig, "unknown split '" + e.split + "' for " + e.file);
    }
    if (!seen.insert(e.file).second) {
      Fail(ErrorKind::kInvalidConfig, e.file + " appears more than once");
    }
  }
}

ManifestEntry DescribeImage(const std::string& root, const std::string& file,
                            const std::string& split) {
  const std::string path = (fs::path(root) / file).string();
  const Tensor image = ReadPng(path);
  ManifestEntry e;
  e.file = file;
  e.height = image.shape().h;
  e.width = image.shape().w;
  e.digest = DigestBytes(ReadFileBytes(path));
  e.split = split;
  return e;
}

DatasetManifest LoadManifest(const std::string& dir) {
  DatasetManifest m;
  m.root = dir;
  const fs::path manifest_path = fs::path(dir) / kManifestFile;
  if (!fs::exists(dir)) Fail(ErrorKind::kNotFound, "dataset directory '" + dir + "' missing");
  if (!fs::exists(manifest_path)) {
    std::vector<std::string> files;
    for (const auto& item : fs::directory_iterator(dir)) {
      if (item.is_regular_file() && item.path().extension() == ".png") {
        files.push_back(item.path().filename().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) m.entries.push_back(DescribeImage(dir, f, "test"));
    return m;
  }
  try {
    const auto bytes = ReadFileBytes(manifest_path.string());
    const json j = json::parse(bytes.begin(), bytes.end());
    m.seed = j.value("seed", uint64_t{0});
    for (const json& item : j.at("images")) {
      ManifestEntry e;
      e.file = item.at("file").get<std::string>();
      e.height = item.at("height").get<int>();
      e.width = item.at("width").get<int>();
      e.digest = std::stoull(item.at("digest").get<std::string>(), nullptr, 16);
      e.split = item.at("split").get<std::string>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    Fail(ErrorKind::kInvalidConfig, "malformed manifest: " + std::string(e.what()));
  }
  m.Validate();
  for (const ManifestEntry& e : m.entries) {
    const std::string path = (fs::path(dir) / e.file).string();
    if (DigestBytes(ReadFileBytes(path)) != e.digest) {
      Fail(ErrorKind::kDigestMismatch, e.file + " does not match its manifest digest");
    }
  }
  return m;
}

void WriteManifest(const DatasetManifest& m) {
  m.Validate();
  json images = json::array();
  for (const ManifestEntry& e : m.entries) {
    images.push_back({{"file", e.file},
                      {"height", e.height},
                      {"width", e.width},
                      {"digest", DigestHex(e.digest)},
                      {"split", e.split}});
  }
  const json j = {{"seed", m.seed}, {"images", images}};
  const std::string text = j.dump(1) + "\n";
  WriteFileBytes((fs::path(m.root) / kManifestFile).string(),
                 std::vector<uint8_t>(text.begin(), text.end()));
}

ImageSet::ImageSet(const DatasetManifest& manifest, const std::string& split, int limit) {
  for (const ManifestEntry& e : manifest.Split(split)) {
    if (limit > 0 && static_cast<int>(images_.size()) >= limit) break;
    const Tensor t = ReadPng((fs::path(manifest.root) / e.file).string());
    Pixels p;
    p.height = t.shape().h;
    p.width = t.shape().w;
    p.rgb.resize(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
      p.rgb[i] = static_cast<uint8_t>(std::lround(t[i] * 255.0));
    }
    images_.push_back(std::move(p));
    names_.push_back(e.file);
  }
}

Tensor ImageSet::Image(size_t i) const {
  const Pixels& p = images_.at(i);
  Tensor t(Shape{1, 3, p.height, p.width});
  for (size_t k = 0; k < t.size(); ++k) t[k] = p.rgb[k] / 255.0;
  return t;
}

Tensor ImageSet::Batch(const std::vector<size_t>& indices, int patch, Rng& rng) const {
  Tensor out(Shape{static_cast<int>(indices.size()), 3, patch, patch});
  for (size_t b = 0; b < indices.size(); ++b) {
    const Pixels& p = images_.at(indices[b]);
    const int top = p.height > patch ? static_cast<int>(rng.Below(p.height - patch + 1)) : 0;
    const int left = p.width > patch ? static_cast<int>(rng.Below(p.width - patch + 1)) : 0;
    const bool flip = rng.Below(2) == 1;
    for (int c = 0; c < 3; ++c) {
      double* dst = out.plane(static_cast<int>(b), c);
      const uint8_t* src = p.rgb.data() + static_cast<size_t>(c) * p.height * p.width;
      for (int i = 0; i < patch; ++i) {
        const int y = std::min(top + i, p.height - 1);
        for (int j = 0; j < patch; ++j) {
          const int jj = flip ? patch - 1 - j : j;
          const int x = std::min(left + jj, p.width - 1);
          dst[i * patch + j] = src[y * p.width + x] / 255.0;
        }
      }
    }
  }
  return out;
}

}  // namespace ugicm
