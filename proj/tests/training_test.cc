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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "gradcheck.h"
#include "ugicm/archive.h"
#include "ugicm/synth.h"
#include "ugicm/training.h"

namespace ugicm {
namespace {

namespace fs = std::filesystem;
using testing::ThrownKind;

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ugicm_training_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 64 training scenes of 32x32, shared by the run-level tests.
const std::string& SmallDataset() {
  static const std::string dir = [] {
    const fs::path p = Scratch("data");
    SynthSpec spec;
    spec.train = 64;
    spec.test = 4;
    spec.height = spec.width = 32;
    spec.seed = 11;
    GenerateSyntheticDataset(p.string(), spec);
    return p.string();
  }();
  return dir;
}

TrainingConfig SmallConfig() {
  TrainingConfig c;
  c.codec.channels = 8;
  c.codec.latent_channels = 8;
  c.schedule.batch_size = 4;
  c.schedule.patch_size = 32;
  c.schedule.stage1_epochs = 1;
  c.schedule.stage2_epochs = 1;
  c.schedule.seed = 5;
  c.codec.lambda = c.schedule.lambda;
  c.data_dir = SmallDataset();
  return c;
}

Tensor Scenes(int n, int size, uint64_t seed) {
  std::vector<Tensor> items;
  for (int i = 0; i < n; ++i) items.push_back(SyntheticImage(size, size, seed + i));
  return Stack(items);
}

struct Fixture {
  TrainingConfig config = SmallConfig();
  std::unique_ptr<EmbeddingModel> model = MakeEmbeddingModel("tiny-test", "");
  MsClipConfig clip_config;
  InstanceCache cache;
  ClipSupervision clip{&clip_config, model.get(), &cache};
};

TEST(SessionPlan, BlockSplitIsBalanced) {
  for (int steps : {1, 2, 7, 10, 125, 250}) {
    const auto plan = SessionPlan(steps, 0.5, Alternation::kBlock);
    const long machine = std::count(plan.begin(), plan.end(), Session::kMachine);
    EXPECT_LE(std::abs((steps - machine) - machine), 1) << steps;
    EXPECT_TRUE(std::is_partitioned(plan.begin(), plan.end(),
                                    [](Session s) { return s == Session::kHuman; }));
  }
}

TEST(SessionPlan, InterleaveKeepsCounts) {
  const auto block = SessionPlan(11, 0.3, Alternation::kBlock);
  const auto inter = SessionPlan(11, 0.3, Alternation::kInterleave);
  EXPECT_EQ(std::count(block.begin(), block.end(), Session::kMachine),
            std::count(inter.begin(), inter.end(), Session::kMachine));
  EXPECT_NE(block, inter);
}

TEST(Stage1Objective, ZeroLambdaIsRateOnly) {
  const Codec codec(SmallConfig().codec, 3);
  const Tensor x = Scenes(2, 32, 1);
  const LossTerms t =
      Stage1Objective(codec, x, PreferenceCondition::Human(), 0.0, QuantizeMode::kNoise, 9, nullptr);
  EXPECT_EQ(t.loss, t.bits_per_pixel);
  EXPECT_GT(t.mse, 0.0);
}

TEST(Stage1Objective, ZeroClipWeightsMatchHumanObjectiveAtMachinePreference) {
  Fixture f;
  f.clip_config.weight_global = f.clip_config.weight_local = f.clip_config.weight_instance = 0.0;
  const Codec codec(f.config.codec, 3);
  const Tensor x = Scenes(2, 32, 1);
  const LossTerms with = Stage1Objective(codec, x, PreferenceCondition::Machine(), 0.01,
                                         QuantizeMode::kNoise, 9, &f.clip);
  const LossTerms without = Stage1Objective(codec, x, PreferenceCondition::Machine(), 0.01,
                                            QuantizeMode::kNoise, 9, nullptr);
  EXPECT_EQ(with.loss, without.loss);
}

TEST(Stage1Objective, MachineGradientMatchesFiniteDifferences) {
  Fixture f;
  Codec codec(f.config.codec, 3);
  const Tensor x = Scenes(2, 32, 1);
  // Make the machine branch non-trivial before probing.
  for (Parameter* p : codec.params().WithPrefix("decoder.pcdm")) {
    Rng rng(17);
    for (double& v : p->value.values()) v += rng.Uniform(-0.3, 0.3);
  }
  auto loss = [&] {
    return Stage1Objective(codec, x, PreferenceCondition::Machine(), 0.05, QuantizeMode::kNoise,
                           21, &f.clip);
  };
  codec.params().ZeroGrad();
  Backward(loss().total);
  const char* probes[] = {"encoder.conv0.weight", "decoder.deconv1.bias", "prior.scale",
                          "hyper_decoder.deconv0.weight", "decoder.pcdm0.fc2.weight",
                          "decoder.pcdm2.fc1.bias"};
  for (const char* name : probes) {
    ASSERT_TRUE(codec.params().Contains(name)) << name;
    Parameter& p = codec.params().Get(name);
    for (size_t i : {size_t{0}, p.value.size() / 2}) {
      const double analytic = p.grad[i];
      const double orig = p.value[i];
      // Smaller steps are dominated by roundoff in the summed rate term.
      const double h = 1e-4;
      NoGradGuard guard;
      p.value[i] = orig + h;
      const double up = loss().loss;
      p.value[i] = orig - h;
      const double down = loss().loss;
      p.value[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      EXPECT_LE(std::abs(analytic - numeric) / denom, 1e-3)
          << name << "[" << i << "] analytic " << analytic << " numeric " << numeric;
    }
  }
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
  Fixture f;
  Trainer trainer(f.config, Codec(f.config.codec, 3), *f.model);
  trainer.optimizer().set_learning_rate(0.0);
  const uint64_t before = trainer.codec().params().Digest();
  const Tensor x = Scenes(2, 32, 1);
  EXPECT_TRUE(std::isfinite(trainer.StepHuman(x, 1)));
  EXPECT_TRUE(std::isfinite(trainer.StepMachine(x, 2)));
  EXPECT_EQ(trainer.codec().params().Digest(), before);
}

TEST(Trainer, OverfitsOneBatch) {
  Fixture f;
  const Tensor x = Scenes(8, 32, 40);
  for (const bool machine : {false, true}) {
    Trainer trainer(f.config, Codec(f.config.codec, 3), *f.model);
    auto step = [&] { return machine ? trainer.StepMachine(x, 77) : trainer.StepHuman(x, 77); };
    const double first = step();
    double last = first;
    for (int i = 1; i < 50; ++i) last = step();
    EXPECT_LT(last, first) << (machine ? "machine" : "human");
  }
}

TEST(Trainer, NonFiniteLossAborts) {
  Fixture f;
  Trainer trainer(f.config, Codec(f.config.codec, 3), *f.model);
  trainer.codec().params().Get("decoder.deconv0.bias").value[0] = std::nan("");
  EXPECT_EQ(ThrownKind([&] { trainer.StepHuman(Scenes(1, 32, 1), 1); }),
            ErrorKind::kNonFiniteLoss);
}

TEST(Trainer, Stage2KeepsEncoderAndEntropyModelFixed) {
  Fixture f;
  const ImageSet data(LoadManifest(SmallDataset()), "train", 16);
  Trainer trainer(f.config, Codec(f.config.codec, 3), *f.model);
  EXPECT_EQ(ThrownKind([&] { trainer.Stage2Epoch(data, 0); }), ErrorKind::kFreezeViolation);
  trainer.EnterStage2();
  const std::vector<std::string> frozen = {"encoder.", "hyper_encoder.", "hyper_decoder.", "prior."};
  const uint64_t before = trainer.codec().params().Digest(frozen);
  const uint64_t decoder_before = trainer.codec().params().Digest(kDecoderPrefixes);
  const EpochReport r = trainer.Stage2Epoch(data, 0);
  EXPECT_EQ(trainer.codec().params().Digest(frozen), before);
  EXPECT_NE(trainer.codec().params().Digest(kDecoderPrefixes), decoder_before);
  ASSERT_EQ(r.sessions.size(), 2u);
  EXPECT_EQ(r.sessions[0].session, Session::kHuman);
  EXPECT_EQ(r.sessions[0].steps, 2);
  EXPECT_EQ(r.sessions[1].steps, 2);
}

TEST(Trainer, Stage2SessionLossesDecrease) {
  Fixture f;
  // Each session covers all 64 images once per epoch.
  f.config.schedule.batch_size = 8;
  f.config.schedule.steps_per_epoch = 16;
  f.config.schedule.stage2_learning_rate = 1e-3;
  const ImageSet data(LoadManifest(SmallDataset()), "train");
  Trainer trainer(f.config, Codec(f.config.codec, 3), *f.model);
  trainer.Stage1Epoch(data, 0);
  trainer.EnterStage2();
  const EpochReport first = trainer.Stage2Epoch(data, 1);
  trainer.Stage2Epoch(data, 2);
  const EpochReport third = trainer.Stage2Epoch(data, 3);
  EXPECT_LT(third.sessions[0].loss, first.sessions[0].loss);
  EXPECT_LT(third.sessions[1].loss, first.sessions[1].loss);
}

TEST(Trainer, Stage1EpochBookkeeping) {
  Fixture f;
  const ImageSet data(LoadManifest(SmallDataset()), "train", 20);
  Trainer trainer(f.config, Codec(f.config.codec, 3), *f.model);
  const EpochReport r = trainer.Stage1Epoch(data, 0);
  EXPECT_EQ(r.sessions[0].steps, 3);
  EXPECT_EQ(r.sessions[1].steps, 2);
  EXPECT_TRUE(std::isnan(r.sessions[0].ms_clip));
  EXPECT_GT(r.sessions[1].ms_clip, 0.0);
  EXPECT_EQ(trainer.global_step(), 5);
}

TEST(TrainingConfig, ParsesAndRoundTrips) {
  const TrainingConfig c = ParseTrainingConfig(R"(
data: d
output: o
seed: 9
codec: {channels: 16, latent_channels: 24}
schedule:
  stage1_epochs: 3
  session_ratio: [0.25, 0.75]
  alternation: interleave
  lambda: 0.013
  patch_size: 64
ms_clip: {weights: [1, 0, 0], mask_background: true}
)", "/base");
  EXPECT_EQ(c.data_dir, "/base/d");
  EXPECT_EQ(c.schedule.seed, 9u);
  EXPECT_EQ(c.schedule.alternation, Alternation::kInterleave);
  EXPECT_EQ(c.codec.lambda, 0.013);
  EXPECT_EQ(c.ms_clip.weight_local, 0.0);
  EXPECT_TRUE(c.ms_clip.mask_background);
  EXPECT_EQ(TrainingConfigFromCanonical(c.Canonical()).Canonical(), c.Canonical());
}

TEST(TrainingConfig, IdentityIndependentOfPathSpelling) {
  const fs::path dir = Scratch("spelling");
  fs::create_directories(dir / "configs");
  std::ofstream(dir / "configs" / "run.yaml") << "data: ../data\noutput: ../run\n";
  const fs::path cwd = fs::current_path();
  fs::current_path(dir);
  const TrainingConfig relative = LoadTrainingConfig("configs/run.yaml");
  fs::current_path(cwd);
  const TrainingConfig absolute = LoadTrainingConfig((dir / "configs" / "run.yaml").string());
  EXPECT_EQ(relative.data_dir, (dir / "data").lexically_normal().string());
  EXPECT_EQ(relative.Digest(), absolute.Digest());
}

TEST(TrainingConfig, RejectsInvalidInput) {
  auto kind = [](const std::string& text) {
    return ThrownKind([&] { ParseTrainingConfig(text); });
  };
  EXPECT_EQ(kind("shedule: {}"), ErrorKind::kInvalidConfig);
  EXPECT_EQ(kind("schedule: {session_ratio: [0.6, 0.6]}"), ErrorKind::kInvalidConfig);
  EXPECT_EQ(kind("schedule: {stage1_epochs: -1}"), ErrorKind::kInvalidConfig);
  EXPECT_EQ(kind("schedule: {stage2_learning_rate: 0}"), ErrorKind::kInvalidConfig);
  EXPECT_EQ(kind("schedule: {patch_size: 40}"), ErrorKind::kInvalidConfig);
  EXPECT_EQ(kind("codec: [1, 2]"), ErrorKind::kInvalidConfig);
  EXPECT_EQ(kind("seed: [oops"), ErrorKind::kInvalidConfig);
}

TEST(RunTraining, Stage2WithoutStage1NeedsCheckpoint) {
  TrainingConfig c = SmallConfig();
  c.schedule.stage1_epochs = 0;
  c.output_dir = Scratch("frozen").string();
  EXPECT_EQ(ThrownKind([&] { RunTraining(c); }), ErrorKind::kFrozenUninitialized);

  TrainingConfig pre = SmallConfig();
  pre.schedule.stage2_epochs = 0;
  pre.output_dir = Scratch("pre").string();
  c.init_checkpoint = RunTraining(pre).checkpoint_path;
  const TrainingResult r = RunTraining(c);
  EXPECT_EQ(r.state.stage, "stage2");
  EXPECT_EQ(r.state.epochs_completed, 1);
}

TEST(RunTraining, SeededRunsAreBitIdenticalAndResumable) {
  TrainingConfig a = SmallConfig();
  a.schedule.stage1_epochs = 2;
  a.output_dir = Scratch("run_a").string();
  TrainingConfig b = a;
  b.output_dir = Scratch("run_b").string();
  const auto bytes_a = ReadFileBytes(RunTraining(a).checkpoint_path);

  // Interrupt the second run after its first epoch, then resume.
  TrainingHooks hooks;
  hooks.on_epoch = [](const EpochReport&) { throw std::runtime_error("interrupted"); };
  EXPECT_THROW(RunTraining(b, hooks), std::runtime_error);
  EXPECT_EQ(LoadCheckpoint((fs::path(b.output_dir) / "latest.ugta").string()).state.epochs_completed,
            1);
  const TrainingResult resumed = RunTraining(b);
  EXPECT_EQ(resumed.epochs.size(), 2u);
  EXPECT_EQ(ReadFileBytes(resumed.checkpoint_path), bytes_a);

  const auto log = ReadFileBytes((fs::path(b.output_dir) / "train_log.csv").string());
  EXPECT_EQ(log, ReadFileBytes((fs::path(a.output_dir) / "train_log.csv").string()));

  TrainingConfig other = a;
  other.schedule.seed = 6;
  other.output_dir = Scratch("run_c").string();
  EXPECT_NE(ReadFileBytes(RunTraining(other).checkpoint_path), bytes_a);
}

TEST(RunTraining, ResumeRejectsDifferentConfig) {
  TrainingConfig a = SmallConfig();
  a.schedule.stage2_epochs = 0;
  a.output_dir = Scratch("mismatch").string();
  RunTraining(a);
  a.schedule.lambda = a.codec.lambda = 0.013;
  EXPECT_EQ(ThrownKind([&] { RunTraining(a); }), ErrorKind::kDigestMismatch);
}

TEST(Checkpoint, RoundTripsParameters) {
  TrainingConfig c = SmallConfig();
  c.schedule.stage2_epochs = 0;
  c.output_dir = Scratch("ckpt").string();
  const TrainingResult r = RunTraining(c);
  const LoadedCheckpoint ckpt = LoadCheckpoint(r.checkpoint_path);
  EXPECT_EQ(ckpt.state.stage, "stage1");
  EXPECT_EQ(ckpt.codec_config.Digest(), c.codec.Digest());
  const Codec codec = ckpt.MakeCodec();
  EXPECT_EQ(codec.params().Digest(), ckpt.parameter_digest);
  EXPECT_NE(ckpt.archive.Find("adam_m/encoder.conv0.weight"), nullptr);

  auto bytes = ReadFileBytes(r.checkpoint_path);
  bytes[bytes.size() / 2] ^= 1;
  const std::string bad = (fs::path(c.output_dir) / "bad.ugta").string();
  WriteFileBytes(bad, bytes);
  EXPECT_EQ(ThrownKind([&] { LoadCheckpoint(bad); }), ErrorKind::kDigestMismatch);
}

}  // namespace
}  // namespace ugicm
