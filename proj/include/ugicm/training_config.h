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

#ifndef UGICM_TRAINING_CONFIG_H_
#define UGICM_TRAINING_CONFIG_H_

#include <cstdint>
#include <string>

#include "ugicm/clip_loss.h"
#include "ugicm/codec.h"
#include "ugicm/nn.h"

namespace ugicm {

// Stage-1 session layout inside an epoch: all human steps then all machine
// steps, or the two spread evenly across the epoch.
enum class Alternation { kBlock, kInterleave };

struct TrainingSchedule {
  int stage1_epochs = 200;
  double stage1_learning_rate = 1e-4;
  int stage2_epochs = 10;
  double stage2_learning_rate = 1e-5;
  // Fractions of each epoch's steps spent in the human and machine sessions.
  double human_ratio = 0.5;
  double machine_ratio = 0.5;
  Alternation alternation = Alternation::kBlock;
  double lambda = 0.0067;
  int batch_size = 8;
  int patch_size = 256;
  uint64_t seed = 0;
  // 0 means floor(train images / batch size).
  int steps_per_epoch = 0;
  // Latent quantization while only the decoder is trained.
  QuantizeMode stage2_quantize = QuantizeMode::kRound;

  void Validate() const;
};

struct TrainingConfig {
  TrainingSchedule schedule;
  CodecConfig codec;  // codec.lambda mirrors schedule.lambda
  MsClipConfig ms_clip;
  AdamConfig optimizer;
  std::string backbone = "tiny-test";
  std::string backbone_weights;
  std::string data_dir;
  std::string output_dir;
  // Parameters to start from (required for Stage 2 without Stage 1).
  std::string init_checkpoint;
  bool resume = true;
  int train_limit = 0;  // 0 uses the whole train split

  void Validate() const;
  // Stable JSON text of every field; stored in checkpoints.
  std::string Canonical() const;
  uint64_t Digest() const;
  int total_epochs() const { return schedule.stage1_epochs + schedule.stage2_epochs; }
};

// Parses the YAML schema documented in README.md. Unknown keys are rejected.
// Paths are made absolute, relative ones against `base_dir`.
TrainingConfig ParseTrainingConfig(const std::string& text, const std::string& base_dir = "");
TrainingConfig LoadTrainingConfig(const std::string& path);
// Inverse of Canonical(), used when restoring checkpoints.
TrainingConfig TrainingConfigFromCanonical(const std::string& json_text);

std::string AlternationName(Alternation a);
Alternation ParseAlternation(const std::string& name);

}  // namespace ugicm

#endif  // UGICM_TRAINING_CONFIG_H_
