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

#include "ugicm/training_config.h"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "ugicm/digest.h"
#include "ugicm/errors.h"

namespace ugicm {
namespace {

using nlohmann::json;

void CheckKeys(const YAML::Node& node, const std::string& where,
               const std::set<std::string>& allowed) {
  if (!node.IsMap()) Fail(ErrorKind::kInvalidConfig, where + " must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      Fail(ErrorKind::kInvalidConfig, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void Read(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) out = node[key].as<T>();
}

std::string Resolve(const std::string& path, const std::string& base) {
  if (path.empty()) return path;
  return std::filesystem::absolute(std::filesystem::path(base) / path).lexically_normal().string();
}

json ToJson(const TrainingConfig& c) {
  const TrainingSchedule& s = c.schedule;
  const MsClipConfig& m = c.ms_clip;
  return {
      {"data", c.data_dir},
      {"output", c.output_dir},
      {"init_checkpoint", c.init_checkpoint},
      {"resume", c.resume},
      {"train_limit", c.train_limit},
      {"seed", s.seed},
      {"codec",
       {{"channels", c.codec.channels},
        {"latent_channels", c.codec.latent_channels},
        {"quantize", QuantizeModeName(c.codec.quantize_mode)}}},
      {"schedule",
       {{"stage1_epochs", s.stage1_epochs},
        {"stage1_learning_rate", s.stage1_learning_rate},
        {"stage2_epochs", s.stage2_epochs},
        {"stage2_learning_rate", s.stage2_learning_rate},
        {"session_ratio", {s.human_ratio, s.machine_ratio}},
        {"alternation", AlternationName(s.alternation)},
        {"lambda", s.lambda},
        {"batch_size", s.batch_size},
        {"patch_size", s.patch_size},
        {"steps_per_epoch", s.steps_per_epoch},
        {"stage2_quantize", QuantizeModeName(s.stage2_quantize)}}},
      {"optimizer",
       {{"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon}}},
      {"ms_clip",
       {{"weights", {m.weight_global, m.weight_local, m.weight_instance}},
        {"min_crop_fraction", m.min_crop_fraction},
        {"max_crop_fraction", m.max_crop_fraction},
        {"mask_background", m.mask_background},
        {"segmenter", m.segmenter},
        {"max_instances", m.proposals.max_instances},
        {"min_area", m.proposals.min_area},
        {"threshold", m.proposals.threshold},
        {"window_fraction", m.proposals.window_fraction}}},
      {"backbone", {{"name", c.backbone}, {"weights", c.backbone_weights}}},
  };
}

}  // namespace

std::string AlternationName(Alternation a) {
  return a == Alternation::kBlock ? "block" : "interleave";
}

Alternation ParseAlternation(const std::string& name) {
  if (name == "block") return Alternation::kBlock;
  if (name == "interleave") return Alternation::kInterleave;
  Fail(ErrorKind::kInvalidConfig, "unknown alternation '" + name + "'");
}

void TrainingSchedule::Validate() const {
  auto bad = [](const std::string& what) { Fail(ErrorKind::kInvalidConfig, what); };
  if (stage1_epochs < 0 || stage2_epochs < 0) bad("epochs must be >= 0");
  if (!(stage1_learning_rate > 0) || !(stage2_learning_rate > 0)) {
    bad("learning rates must be > 0");
  }
  if (human_ratio < 0 || machine_ratio < 0 || std::abs(human_ratio + machine_ratio - 1) > 1e-9) {
    bad("session ratios must be non-negative and sum to 1");
  }
  if (!(lambda >= 0) || !std::isfinite(lambda)) bad("lambda must be finite and >= 0");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (patch_size < kDownsampling || patch_size % kDownsampling != 0) {
    bad("patch_size must be a positive multiple of 16");
  }
  if (steps_per_epoch < 0) bad("steps_per_epoch must be >= 0");
}

void TrainingConfig::Validate() const {
  schedule.Validate();
  codec.Validate();
  ms_clip.Validate();
  if (codec.lambda != schedule.lambda) {
    Fail(ErrorKind::kInvalidConfig, "codec lambda differs from schedule lambda");
  }
  if (train_limit < 0) Fail(ErrorKind::kInvalidConfig, "train_limit must be >= 0");
  if (!(optimizer.beta1 >= 0 && optimizer.beta1 < 1 && optimizer.beta2 >= 0 &&
        optimizer.beta2 < 1 && optimizer.epsilon > 0)) {
    Fail(ErrorKind::kInvalidConfig, "invalid optimizer moments");
  }
}

std::string TrainingConfig::Canonical() const { return ToJson(*this).dump(); }

uint64_t TrainingConfig::Digest() const {
  const std::string text = Canonical();
  return DigestBytes(std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

TrainingConfig ParseTrainingConfig(const std::string& text, const std::string& base_dir) {
  TrainingConfig c;
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root || root.IsNull()) Fail(ErrorKind::kInvalidConfig, "empty config");
    CheckKeys(root, "config",
              {"data", "output", "init_checkpoint", "resume", "train_limit", "seed", "codec",
               "schedule", "optimizer", "ms_clip", "backbone"});
    Read(root, "data", c.data_dir);
    Read(root, "output", c.output_dir);
    Read(root, "init_checkpoint", c.init_checkpoint);
    Read(root, "resume", c.resume);
    Read(root, "train_limit", c.train_limit);
    Read(root, "seed", c.schedule.seed);

    if (const YAML::Node n = root["codec"]) {
      CheckKeys(n, "codec", {"channels", "latent_channels", "quantize"});
      Read(n, "channels", c.codec.channels);
      Read(n, "latent_channels", c.codec.latent_channels);
      if (n["quantize"]) c.codec.quantize_mode = ParseQuantizeMode(n["quantize"].as<std::string>());
    }
    if (const YAML::Node n = root["schedule"]) {
      CheckKeys(n, "schedule",
                {"stage1_epochs", "stage1_learning_rate", "stage2_epochs",
                 "stage2_learning_rate", "session_ratio", "alternation", "lambda",
                 "batch_size", "patch_size", "steps_per_epoch", "stage2_quantize"});
      TrainingSchedule& s = c.schedule;
      Read(n, "stage1_epochs", s.stage1_epochs);
      Read(n, "stage1_learning_rate", s.stage1_learning_rate);
      Read(n, "stage2_epochs", s.stage2_epochs);
      Read(n, "stage2_learning_rate", s.stage2_learning_rate);
      if (const YAML::Node r = n["session_ratio"]) {
        if (!r.IsSequence() || r.size() != 2) {
          Fail(ErrorKind::kInvalidConfig, "session_ratio needs two entries");
        }
        s.human_ratio = r[0].as<double>();
        s.machine_ratio = r[1].as<double>();
      }
      if (n["alternation"]) s.alternation = ParseAlternation(n["alternation"].as<std::string>());
      Read(n, "lambda", s.lambda);
      Read(n, "batch_size", s.batch_size);
      Read(n, "patch_size", s.patch_size);
      Read(n, "steps_per_epoch", s.steps_per_epoch);
      if (n["stage2_quantize"]) {
        s.stage2_quantize = ParseQuantizeMode(n["stage2_quantize"].as<std::string>());
      }
    }
    if (const YAML::Node n = root["optimizer"]) {
      CheckKeys(n, "optimizer", {"beta1", "beta2", "epsilon"});
      Read(n, "beta1", c.optimizer.beta1);
      Read(n, "beta2", c.optimizer.beta2);
      Read(n, "epsilon", c.optimizer.epsilon);
    }
    if (const YAML::Node n = root["ms_clip"]) {
      CheckKeys(n, "ms_clip",
                {"weights", "min_crop_fraction", "max_crop_fraction", "mask_background",
                 "segmenter", "max_instances", "min_area", "threshold", "window_fraction"});
      MsClipConfig& m = c.ms_clip;
      if (const YAML::Node w = n["weights"]) {
        if (!w.IsSequence() || w.size() != 3) {
          Fail(ErrorKind::kInvalidConfig, "ms_clip weights need three entries");
        }
        m.weight_global = w[0].as<double>();
        m.weight_local = w[1].as<double>();
        m.weight_instance = w[2].as<double>();
      }
      Read(n, "min_crop_fraction", m.min_crop_fraction);
      Read(n, "max_crop_fraction", m.max_crop_fraction);
      Read(n, "mask_background", m.mask_background);
      Read(n, "segmenter", m.segmenter);
      Read(n, "max_instances", m.proposals.max_instances);
      Read(n, "min_area", m.proposals.min_area);
      Read(n, "threshold", m.proposals.threshold);
      Read(n, "window_fraction", m.proposals.window_fraction);
    }
    if (const YAML::Node n = root["backbone"]) {
      CheckKeys(n, "backbone", {"name", "weights"});
      Read(n, "name", c.backbone);
      Read(n, "weights", c.backbone_weights);
    }
  } catch (const YAML::Exception& e) {
    Fail(ErrorKind::kInvalidConfig, std::string("config parse error: ") + e.what());
  }
  c.codec.lambda = c.schedule.lambda;
  c.data_dir = Resolve(c.data_dir, base_dir);
  c.output_dir = Resolve(c.output_dir, base_dir);
  c.init_checkpoint = Resolve(c.init_checkpoint, base_dir);
  c.backbone_weights = Resolve(c.backbone_weights, base_dir);
  c.Validate();
  return c;
}

TrainingConfig LoadTrainingConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read config '" + path + "'");
  std::stringstream text;
  text << in.rdbuf();
  return ParseTrainingConfig(text.str(), std::filesystem::path(path).parent_path().string());
}

TrainingConfig TrainingConfigFromCanonical(const std::string& json_text) {
  // JSON is a subset of YAML, so the same parser applies; paths are already
  // resolved.
  return ParseTrainingConfig(json_text);
}

}  // namespace ugicm
