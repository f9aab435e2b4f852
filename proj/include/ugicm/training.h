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

#ifndef UGICM_TRAINING_H_
#define UGICM_TRAINING_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ugicm/archive.h"
#include "ugicm/clip_loss.h"
#include "ugicm/codec.h"
#include "ugicm/dataset.h"
#include "ugicm/embedding.h"
#include "ugicm/nn.h"
#include "ugicm/training_config.h"

namespace ugicm {

// Independent seed for one (purpose, index) stream of a run.
uint64_t StreamSeed(uint64_t seed, uint64_t purpose, uint64_t index);

enum class Session { kHuman, kMachine };
std::string SessionName(Session s);

// Session of every step of one epoch. Stage-1 honours `alternation`; Stage 2
// always runs the human block first.
std::vector<Session> SessionPlan(int steps, double human_ratio, Alternation alternation);

// One objective evaluation. Diagnostics are NaN when a term is absent.
struct LossTerms {
  Var total;
  double loss = 0.0;
  double bits_per_pixel = 0.0;
  double mse = 0.0;
  double ms_clip = 0.0;
};

struct ClipSupervision {
  const MsClipConfig* config = nullptr;
  const EmbeddingModel* model = nullptr;
  InstanceCache* cache = nullptr;
};

// lambda * (255^2 * MSE + L_MC) + bits per pixel, decoding at `beta`. Without
// supervision the L_MC term is dropped.
LossTerms Stage1Objective(const Codec& codec, const Tensor& batch, const PreferenceCondition& beta,
                          double lambda, QuantizeMode mode, uint64_t seed,
                          const ClipSupervision* clip);
// Decoder-only objectives on latents from the (frozen) encoder: 255^2 * MSE at
// the human preference, L_MC at the machine preference.
LossTerms Stage2HumanObjective(const Codec& codec, const Tensor& batch, QuantizeMode mode,
                               uint64_t seed);
LossTerms Stage2MachineObjective(const Codec& codec, const Tensor& batch, QuantizeMode mode,
                                 uint64_t seed, const ClipSupervision& clip);

struct SessionReport {
  Session session = Session::kHuman;
  int steps = 0;
  // Means over the session's steps.
  double loss = 0.0;
  double bits_per_pixel = 0.0;
  double mse = 0.0;
  double ms_clip = 0.0;
};

struct EpochReport {
  int epoch = 0;
  int stage = 1;
  std::vector<SessionReport> sessions;  // human first
};

// Owns the codec and optimizer state of one run.
class Trainer {
 public:
  Trainer(const TrainingConfig& config, Codec codec, const EmbeddingModel& model);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // One optimizer step each; return the batch loss. Throws kNonFiniteLoss.
  double StepHuman(const Tensor& batch, uint64_t seed);
  double StepMachine(const Tensor& batch, uint64_t seed);
  double StepDecoderHuman(const Tensor& batch, uint64_t seed);
  double StepDecoderMachine(const Tensor& batch, uint64_t seed);
  const LossTerms& last_terms() const { return last_; }

  EpochReport Stage1Epoch(const ImageSet& data, int epoch);
  // Requires EnterStage2(); throws kFreezeViolation if the encoder or entropy
  // model changes.
  EpochReport Stage2Epoch(const ImageSet& data, int epoch);
  // Freezes encoder and entropy model and applies the Stage-2 learning rate.
  void EnterStage2();
  bool in_stage2() const { return stage2_; }

  // Steps per epoch for a training set of `images` images.
  int StepsPerEpoch(size_t images) const;

  Codec& codec() { return codec_; }
  const Codec& codec() const { return codec_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  const TrainingConfig& config() const { return config_; }
  long long global_step() const { return global_step_; }
  void set_global_step(long long step) { global_step_ = step; }

 private:
  double Apply(LossTerms terms);
  Tensor NextBatch(const ImageSet& data, const std::vector<size_t>& order, int step);
  std::vector<size_t> EpochOrder(size_t n, int epoch) const;
  ClipSupervision Clip();

  TrainingConfig config_;
  Codec codec_;
  const EmbeddingModel* model_;
  Adam adam_;
  InstanceCache cache_;
  LossTerms last_;
  long long global_step_ = 0;
  bool stage2_ = false;
};

// Checkpoint archive: parameters under "param/<name>", Adam moments under
// "adam_m/<name>" and "adam_v/<name>", run state in the JSON metadata.
struct CheckpointState {
  std::string stage = "init";  // "init", "stage1" or "stage2"
  int epochs_completed = 0;
};

TensorArchive MakeCheckpoint(const Trainer& trainer, const CheckpointState& state);
void SaveCheckpoint(const std::string& path, const Trainer& trainer, const CheckpointState& state);

struct LoadedCheckpoint {
  CodecConfig codec_config;
  TensorArchive archive;
  CheckpointState state;
  uint64_t parameter_digest = 0;
  uint64_t file_digest = 0;
  std::string backbone;

  Codec MakeCodec() const;
};
LoadedCheckpoint LoadCheckpoint(const std::string& path);
// Restores parameters, optimizer moments and counters into `trainer`.
void RestoreTrainer(const LoadedCheckpoint& ckpt, Trainer& trainer);

struct TrainingHooks {
  std::function<void(const EpochReport&)> on_epoch;
};

struct TrainingResult {
  std::string checkpoint_path;
  CheckpointState state;
  std::vector<EpochReport> epochs;  // epochs run by this call
};

// Stage 1 then Stage 2 with a checkpoint and log rows after each epoch.
// Output layout: <output>/checkpoints/epoch_NNNN.ugta, <output>/latest.ugta,
// <output>/train_log.csv. Resumes from latest.ugta when `resume` is set.
TrainingResult RunTraining(const TrainingConfig& config, const TrainingHooks& hooks = {});

}  // namespace ugicm

#endif  // UGICM_TRAINING_H_
