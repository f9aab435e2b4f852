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

#include "ugicm/archive.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ugicm/digest.h"
#include "ugicm/errors.h"

namespace ugicm {
namespace {

constexpr char kMagic[4] = {'U', 'G', 'T', 'A'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "archive I/O assumes a little-endian host");

template <typename T>
void Put(std::vector<uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& bytes, size_t end)
      : bytes_(bytes), end_(end) {}

  template <typename T>
  T Get() {
    T value;
    std::memcpy(&value, Take(sizeof(T)), sizeof(T));
    return value;
  }
  const uint8_t* Take(size_t n) {
    if (n > end_ - pos_) Fail(ErrorKind::kCorruptStream, "archive is truncated");
    const uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::vector<uint8_t>& bytes_;
  size_t end_;
  size_t pos_ = 0;
};

}  // namespace

const Tensor* TensorArchive::Find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& TensorArchive::Get(const std::string& name) const {
  const Tensor* t = Find(name);
  if (t == nullptr) Fail(ErrorKind::kNotFound, "archive has no tensor '" + name + "'");
  return *t;
}

std::vector<uint8_t> SerializeArchive(const TensorArchive& archive, StorageType type) {
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  Put<uint32_t>(out, kVersion);
  Put<uint64_t>(out, archive.metadata.size());
  out.insert(out.end(), archive.metadata.begin(), archive.metadata.end());
  Put<uint64_t>(out, archive.tensors.size());
  for (const auto& [name, t] : archive.tensors) {
    Put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    Put<uint8_t>(out, static_cast<uint8_t>(type));
    const Shape& s = t.shape();
    for (int d : {s.n, s.c, s.h, s.w}) Put<int32_t>(out, d);
    for (double v : t.values()) {
      if (type == StorageType::kFloat64) {
        Put<double>(out, v);
      } else {
        Put<float>(out, static_cast<float>(v));
      }
    }
  }
  Put<uint64_t>(out, DigestBytes(out));
  return out;
}

TensorArchive ParseArchive(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    Fail(ErrorKind::kBadMagic, "not a tensor archive");
  }
  if (bytes.size() < 24) Fail(ErrorKind::kCorruptStream, "archive is truncated");
  const size_t body = bytes.size() - 8;
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != DigestBytes(std::span(bytes.data(), body))) {
    Fail(ErrorKind::kDigestMismatch, "archive checksum does not match its contents");
  }
  Reader r(bytes, body);
  r.Take(4);
  const uint32_t version = r.Get<uint32_t>();
  if (version != kVersion) {
    Fail(ErrorKind::kVersionUnsupported,
         "archive version " + std::to_string(version) + " is not supported");
  }
  TensorArchive archive;
  const uint64_t meta_len = r.Get<uint64_t>();
  const uint8_t* meta = r.Take(meta_len);
  archive.metadata.assign(reinterpret_cast<const char*>(meta), meta_len);
  const uint64_t count = r.Get<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.Get<uint32_t>();
    const uint8_t* name = r.Take(name_len);
    const auto type = static_cast<StorageType>(r.Get<uint8_t>());
    Shape s;
    s.n = r.Get<int32_t>();
    s.c = r.Get<int32_t>();
    s.h = r.Get<int32_t>();
    s.w = r.Get<int32_t>();
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0 ||
        (type != StorageType::kFloat64 && type != StorageType::kFloat32)) {
      Fail(ErrorKind::kCorruptStream, "bad tensor record in archive");
    }
    Tensor t(s);
    for (double& v : t.values()) {
      v = type == StorageType::kFloat64 ? r.Get<double>() : r.Get<float>();
    }
    archive.tensors.emplace_back(std::string(reinterpret_cast<const char*>(name), name_len),
                                 std::move(t));
  }
  if (!r.done()) Fail(ErrorKind::kCorruptStream, "trailing bytes in archive");
  return archive;
}

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open '" + path + "'");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  // Write-then-rename so readers never observe a partial file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) Fail(ErrorKind::kIo, "short write to '" + path + "'");
  }
  std::filesystem::rename(tmp, p);
}

void WriteArchive(const std::string& path, const TensorArchive& archive,
                  StorageType type) {
  WriteFileBytes(path, SerializeArchive(archive, type));
}

TensorArchive ReadArchive(const std::string& path) {
  return ParseArchive(ReadFileBytes(path));
}

}  // namespace ugicm
