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

#include "ugicm/training.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "ugicm/digest.h"
#include "ugicm/errors.h"
#include "ugicm/ops.h"

namespace ugicm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kPixelScale = 255.0 * 255.0;
constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

enum Purpose : uint64_t { kInit = 1, kShuffle, kBatch, kNoise };

uint64_t SplitMix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Tensor DecodeLatentsForTraining(const Codec& codec, const Tensor& batch, QuantizeMode mode,
                                uint64_t seed, double* bits_per_pixel) {
  NoGradGuard guard;
  const Tensor y = codec.EncodeImage(batch);
  const Tensor y_hat = Quantize(y, mode, seed);
  const Tensor z = codec.HyperEncode(Var::Constant(y)).value();
  const Tensor z_hat = Quantize(z, QuantizeMode::kRound, 0);
  const double bits = codec.RateBits(Var::Constant(y_hat), Var::Constant(z_hat)).value()[0];
  const Shape& s = batch.shape();
  *bits_per_pixel = bits / (static_cast<double>(s.n) * s.h * s.w);
  return y_hat;
}

// Only the run-defining fields; output location and resume policy do not
// change the trajectory.
TrainingConfig RunIdentity(TrainingConfig config) {
  config.output_dir.clear();
  config.resume = true;
  return config;
}

json CodecJson(const CodecConfig& c) {
  return {{"channels", c.channels},
          {"latent_channels", c.latent_channels},
          {"stages", c.stages},
          {"lambda", c.lambda},
          {"quantize", QuantizeModeName(c.quantize_mode)}};
}

void AddTo(SessionReport& r, const LossTerms& t) {
  ++r.steps;
  r.loss += t.loss;
  r.bits_per_pixel += t.bits_per_pixel;
  r.mse += t.mse;
  r.ms_clip += t.ms_clip;
}

void Finish(SessionReport& r) {
  if (r.steps == 0) {
    r.loss = r.bits_per_pixel = r.mse = r.ms_clip = kAbsent;
    return;
  }
  r.loss /= r.steps;
  r.bits_per_pixel /= r.steps;
  r.mse /= r.steps;
  r.ms_clip /= r.steps;
}

std::vector<std::string> PrefixesOfFrozenSets() {
  std::vector<std::string> out = kEncoderPrefixes;
  out.insert(out.end(), kEntropyPrefixes.begin(), kEntropyPrefixes.end());
  return out;
}

std::string Number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr char kLogHeader[] = "epoch,stage,session,steps,loss,rate_bits_per_pixel,mse,ms_clip";

}  // namespace

uint64_t StreamSeed(uint64_t seed, uint64_t purpose, uint64_t index) {
  return SplitMix(SplitMix(SplitMix(seed) ^ purpose) ^ index);
}

std::string SessionName(Session s) { return s == Session::kHuman ? "human" : "machine"; }

std::vector<Session> SessionPlan(int steps, double human_ratio, Alternation alternation) {
  const int human = static_cast<int>(std::llround(human_ratio * steps));
  const int machine = steps - human;
  std::vector<Session> plan(steps, Session::kHuman);
  for (int i = 0; i < steps; ++i) {
    if (alternation == Alternation::kBlock) {
      if (i >= human) plan[i] = Session::kMachine;
    } else {
      // Bresenham spread of `machine` steps over the epoch.
      const long long a = static_cast<long long>(i) * machine / steps;
      const long long b = static_cast<long long>(i + 1) * machine / steps;
      if (b > a) plan[i] = Session::kMachine;
    }
  }
  return plan;
}

LossTerms Stage1Objective(const Codec& codec, const Tensor& batch, const PreferenceCondition& beta,
                          double lambda, QuantizeMode mode, uint64_t seed,
                          const ClipSupervision* clip) {
  Rng noise(seed);
  const Var x = Var::Constant(batch);
  const CodecForward f = codec.Forward(x, beta, mode, noise);
  const Shape& s = batch.shape();
  const Var bpp = Scale(f.bits, 1.0 / (static_cast<double>(s.n) * s.h * s.w));
  const Var mse = MeanSquaredError(f.x_hat, x);
  Var distortion = Scale(mse, kPixelScale);
  LossTerms t;
  t.ms_clip = kAbsent;
  if (clip != nullptr) {
    Rng crops(StreamSeed(seed, kNoise, 1));
    const Var mc = LossMsClip(x, f.x_hat, *clip->config, *clip->model, crops, clip->cache);
    distortion = Add(distortion, mc);
    t.ms_clip = mc.value()[0];
  }
  t.total = Add(Scale(distortion, lambda), bpp);
  t.loss = t.total.value()[0];
  t.bits_per_pixel = bpp.value()[0];
  t.mse = mse.value()[0];
  return t;
}

LossTerms Stage2HumanObjective(const Codec& codec, const Tensor& batch, QuantizeMode mode,
                               uint64_t seed) {
  LossTerms t;
  const Tensor y_hat = DecodeLatentsForTraining(codec, batch, mode, seed, &t.bits_per_pixel);
  const Var x_hat = codec.Decode(Var::Constant(y_hat), PreferenceCondition::Human());
  const Var mse = MeanSquaredError(x_hat, Var::Constant(batch));
  t.total = Scale(mse, kPixelScale);
  t.loss = t.total.value()[0];
  t.mse = mse.value()[0];
  t.ms_clip = kAbsent;
  return t;
}

LossTerms Stage2MachineObjective(const Codec& codec, const Tensor& batch, QuantizeMode mode,
                                 uint64_t seed, const ClipSupervision& clip) {
  LossTerms t;
  const Tensor y_hat = DecodeLatentsForTraining(codec, batch, mode, seed, &t.bits_per_pixel);
  const Var x_hat = codec.Decode(Var::Constant(y_hat), PreferenceCondition::Machine());
  const Var x = Var::Constant(batch);
  Rng crops(StreamSeed(seed, kNoise, 1));
  t.total = LossMsClip(x, x_hat, *clip.config, *clip.model, crops, clip.cache);
  t.loss = t.total.value()[0];
  {
    NoGradGuard guard;
    t.mse = MeanSquaredError(x_hat, x).value()[0];
  }
  t.ms_clip = t.loss;
  return t;
}

Trainer::Trainer(const TrainingConfig& config, Codec codec, const EmbeddingModel& model)
    : config_(config),
      codec_(std::move(codec)),
      model_(&model),
      adam_(codec_.params().All(), [&] {
        AdamConfig a = config.optimizer;
        a.learning_rate = config.schedule.stage1_learning_rate;
        return a;
      }()) {
  config_.Validate();
  if (codec_.config().Digest() != config_.codec.Digest()) {
    Fail(ErrorKind::kDigestMismatch, "codec configuration differs from the training config");
  }
}

ClipSupervision Trainer::Clip() { return {&config_.ms_clip, model_, &cache_}; }

double Trainer::Apply(LossTerms terms) {
  if (!std::isfinite(terms.loss)) {
    std::ostringstream os;
    os << "non-finite loss at step " << global_step_ << ": loss=" << terms.loss
       << " bpp=" << terms.bits_per_pixel << " mse=" << terms.mse << " ms_clip=" << terms.ms_clip;
    Fail(ErrorKind::kNonFiniteLoss, os.str());
  }
  codec_.params().ZeroGrad();
  Backward(terms.total);
  adam_.Step();
  ++global_step_;
  terms.total = Var();
  last_ = std::move(terms);
  return last_.loss;
}

double Trainer::StepHuman(const Tensor& batch, uint64_t seed) {
  return Apply(Stage1Objective(codec_, batch, PreferenceCondition::Human(),
                               config_.schedule.lambda, config_.codec.quantize_mode, seed,
                               nullptr));
}

double Trainer::StepMachine(const Tensor& batch, uint64_t seed) {
  const ClipSupervision clip = Clip();
  return Apply(Stage1Objective(codec_, batch, PreferenceCondition::Machine(),
                               config_.schedule.lambda, config_.codec.quantize_mode, seed,
                               &clip));
}

double Trainer::StepDecoderHuman(const Tensor& batch, uint64_t seed) {
  return Apply(Stage2HumanObjective(codec_, batch, config_.schedule.stage2_quantize, seed));
}

double Trainer::StepDecoderMachine(const Tensor& batch, uint64_t seed) {
  return Apply(
      Stage2MachineObjective(codec_, batch, config_.schedule.stage2_quantize, seed, Clip()));
}

int Trainer::StepsPerEpoch(size_t images) const {
  if (config_.schedule.steps_per_epoch > 0) return config_.schedule.steps_per_epoch;
  const int steps = static_cast<int>(images / config_.schedule.batch_size);
  if (steps == 0) {
    Fail(ErrorKind::kInvalidConfig, "training set has fewer images than one batch");
  }
  return steps;
}

std::vector<size_t> Trainer::EpochOrder(size_t n, int epoch) const {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(StreamSeed(config_.schedule.seed, kShuffle, static_cast<uint64_t>(epoch)));
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.Below(i)]);
  return order;
}

Tensor Trainer::NextBatch(const ImageSet& data, const std::vector<size_t>& order, int step) {
  const int b = config_.schedule.batch_size;
  std::vector<size_t> indices(b);
  for (int j = 0; j < b; ++j) {
    indices[j] = order[(static_cast<size_t>(step) * b + j) % order.size()];
  }
  Rng rng(StreamSeed(config_.schedule.seed, kBatch, static_cast<uint64_t>(global_step_)));
  return data.Batch(indices, config_.schedule.patch_size, rng);
}

EpochReport Trainer::Stage1Epoch(const ImageSet& data, int epoch) {
  if (stage2_) Fail(ErrorKind::kInvalidConfig, "stage 1 cannot follow stage 2");
  adam_.set_learning_rate(config_.schedule.stage1_learning_rate);
  const int steps = StepsPerEpoch(data.size());
  const std::vector<size_t> order = EpochOrder(data.size(), epoch);
  const std::vector<Session> plan =
      SessionPlan(steps, config_.schedule.human_ratio, config_.schedule.alternation);
  SessionReport human{Session::kHuman}, machine{Session::kMachine};
  for (int k = 0; k < steps; ++k) {
    const Tensor batch = NextBatch(data, order, k);
    const uint64_t seed = StreamSeed(config_.schedule.seed, kNoise, global_step_);
    if (plan[k] == Session::kHuman) {
      StepHuman(batch, seed);
      AddTo(human, last_);
    } else {
      StepMachine(batch, seed);
      AddTo(machine, last_);
    }
  }
  Finish(human);
  Finish(machine);
  return EpochReport{epoch, 1, {human, machine}};
}

void Trainer::EnterStage2() {
  for (const std::string& prefix : PrefixesOfFrozenSets()) codec_.params().SetFrozen(prefix, true);
  adam_.set_learning_rate(config_.schedule.stage2_learning_rate);
  stage2_ = true;
}

EpochReport Trainer::Stage2Epoch(const ImageSet& data, int epoch) {
  const std::vector<std::string> frozen = PrefixesOfFrozenSets();
  bool all_frozen = stage2_;
  for (const std::string& prefix : frozen) {
    for (const Parameter* p : codec_.params().WithPrefix(prefix)) all_frozen &= p->frozen;
  }
  if (!all_frozen) {
    Fail(ErrorKind::kFreezeViolation, "stage 2 requires a frozen encoder and entropy model");
  }
  adam_.set_learning_rate(config_.schedule.stage2_learning_rate);
  const uint64_t before = codec_.params().Digest(frozen);
  const int steps = StepsPerEpoch(data.size());
  const std::vector<size_t> order = EpochOrder(data.size(), epoch);
  const std::vector<Session> plan =
      SessionPlan(steps, config_.schedule.human_ratio, Alternation::kBlock);
  SessionReport human{Session::kHuman}, machine{Session::kMachine};
  for (int k = 0; k < steps; ++k) {
    const Tensor batch = NextBatch(data, order, k);
    const uint64_t seed = StreamSeed(config_.schedule.seed, kNoise, global_step_);
    if (plan[k] == Session::kHuman) {
      StepDecoderHuman(batch, seed);
      AddTo(human, last_);
    } else {
      StepDecoderMachine(batch, seed);
      AddTo(machine, last_);
    }
  }
  if (codec_.params().Digest(frozen) != before) {
    Fail(ErrorKind::kFreezeViolation, "encoder or entropy model changed during stage 2");
  }
  Finish(human);
  Finish(machine);
  return EpochReport{epoch, 2, {human, machine}};
}

TensorArchive MakeCheckpoint(const Trainer& trainer, const CheckpointState& state) {
  const TrainingConfig identity = RunIdentity(trainer.config());
  const ParameterStore& params = trainer.codec().params();
  json meta = {
      {"format", "ugicm-checkpoint"},
      {"version", 1},
      {"stage", state.stage},
      {"epochs_completed", state.epochs_completed},
      {"global_step", trainer.global_step()},
      {"adam_steps", trainer.optimizer().steps()},
      {"learning_rate", trainer.optimizer().learning_rate()},
      {"codec", CodecJson(trainer.codec().config())},
      {"codec_digest", DigestHex(trainer.codec().config().Digest())},
      {"training_config", identity.Canonical()},
      {"training_digest", DigestHex(identity.Digest())},
      {"parameter_digest", DigestHex(params.Digest())},
      {"backbone", trainer.config().backbone},
  };
  TensorArchive archive;
  archive.metadata = meta.dump();
  for (const Parameter* p : params.All()) archive.tensors.emplace_back("param/" + p->name, p->value);
  for (const auto& [name, m] : trainer.optimizer().moments()) {
    archive.tensors.emplace_back("adam_m/" + name, m.first);
    archive.tensors.emplace_back("adam_v/" + name, m.second);
  }
  return archive;
}

void SaveCheckpoint(const std::string& path, const Trainer& trainer,
                    const CheckpointState& state) {
  WriteArchive(path, MakeCheckpoint(trainer, state));
}

LoadedCheckpoint LoadCheckpoint(const std::string& path) {
  LoadedCheckpoint c;
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  c.file_digest = DigestBytes(bytes);
  c.archive = ParseArchive(bytes);
  try {
    const json meta = json::parse(c.archive.metadata);
    if (meta.value("format", "") != "ugicm-checkpoint") {
      Fail(ErrorKind::kCorruptStream, path + " is not a codec checkpoint");
    }
    if (meta.at("version").get<int>() != 1) {
      Fail(ErrorKind::kVersionUnsupported, "unsupported checkpoint version");
    }
    const json& cc = meta.at("codec");
    c.codec_config.channels = cc.at("channels").get<int>();
    c.codec_config.latent_channels = cc.at("latent_channels").get<int>();
    c.codec_config.stages = cc.at("stages").get<int>();
    c.codec_config.lambda = cc.at("lambda").get<double>();
    c.codec_config.quantize_mode = ParseQuantizeMode(cc.at("quantize").get<std::string>());
    c.codec_config.Validate();
    c.state.stage = meta.at("stage").get<std::string>();
    c.state.epochs_completed = meta.at("epochs_completed").get<int>();
    c.parameter_digest = std::stoull(meta.at("parameter_digest").get<std::string>(), nullptr, 16);
    c.backbone = meta.value("backbone", "");
  } catch (const json::exception& e) {
    Fail(ErrorKind::kCorruptStream, "malformed checkpoint metadata: " + std::string(e.what()));
  }
  return c;
}

Codec LoadedCheckpoint::MakeCodec() const {
  ParameterStore store;
  for (const auto& [name, tensor] : archive.tensors) {
    if (name.starts_with("param/")) store.Add(name.substr(6), tensor);
  }
  if (store.Digest() != parameter_digest) {
    Fail(ErrorKind::kDigestMismatch, "checkpoint parameters do not match their digest");
  }
  return Codec(codec_config, std::move(store));
}

void RestoreTrainer(const LoadedCheckpoint& ckpt, Trainer& trainer) {
  const json meta = json::parse(ckpt.archive.metadata);
  const TrainingConfig identity = RunIdentity(trainer.config());
  if (meta.at("training_digest").get<std::string>() != DigestHex(identity.Digest())) {
    Fail(ErrorKind::kDigestMismatch, "checkpoint was written by a different training config");
  }
  for (Parameter* p : trainer.codec().params().All()) {
    const Tensor& t = ckpt.archive.Get("param/" + p->name);
    if (t.shape() != p->value.shape()) {
      Fail(ErrorKind::kShapeMismatch, "checkpoint tensor " + p->name + " has the wrong shape");
    }
    p->value = t;
  }
  std::map<std::string, Adam::Moments> moments;
  for (const Parameter* p : trainer.codec().params().All()) {
    moments[p->name] = Adam::Moments{ckpt.archive.Get("adam_m/" + p->name),
                                     ckpt.archive.Get("adam_v/" + p->name)};
  }
  trainer.optimizer().Restore(meta.at("adam_steps").get<long long>(), std::move(moments));
  trainer.optimizer().set_learning_rate(meta.at("learning_rate").get<double>());
  trainer.set_global_step(meta.at("global_step").get<long long>());
}

TrainingResult RunTraining(const TrainingConfig& config, const TrainingHooks& hooks) {
  config.Validate();
  const TrainingSchedule& s = config.schedule;
  const fs::path out(config.output_dir.empty() ? "." : config.output_dir);
  const fs::path latest = out / "latest.ugta";
  const fs::path log_path = out / "train_log.csv";

  std::optional<LoadedCheckpoint> resumed;
  if (config.resume && fs::exists(latest)) resumed = LoadCheckpoint(latest.string());
  if (!resumed && config.init_checkpoint.empty() && s.stage1_epochs == 0 && s.stage2_epochs > 0) {
    Fail(ErrorKind::kFrozenUninitialized,
         "stage 2 would freeze an untrained encoder; run stage 1 or set init_checkpoint");
  }

  const DatasetManifest manifest = LoadManifest(config.data_dir);
  const ImageSet train(manifest, "train", config.train_limit);
  if (train.size() == 0) Fail(ErrorKind::kInvalidConfig, "dataset has no training images");
  const std::unique_ptr<EmbeddingModel> model =
      MakeEmbeddingModel(config.backbone, config.backbone_weights);

  Codec codec = [&] {
    if (resumed) return resumed->MakeCodec();
    if (!config.init_checkpoint.empty()) {
      const LoadedCheckpoint init = LoadCheckpoint(config.init_checkpoint);
      if (init.codec_config.Digest() != config.codec.Digest()) {
        Fail(ErrorKind::kDigestMismatch, "init checkpoint has a different codec configuration");
      }
      return init.MakeCodec();
    }
    return Codec(config.codec, StreamSeed(s.seed, kInit, 0));
  }();
  Trainer trainer(config, std::move(codec), *model);
  CheckpointState state;
  if (resumed) {
    RestoreTrainer(*resumed, trainer);
    state = resumed->state;
  }

  // Keep log rows of completed epochs only.
  std::vector<std::string> rows;
  if (resumed && fs::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && std::stoi(line) < state.epochs_completed) rows.push_back(line);
    }
  }
  auto write_log = [&] {
    std::string text = std::string(kLogHeader) + "\n";
    for (const std::string& r : rows) text += r + "\n";
    WriteFileBytes(log_path.string(), std::vector<uint8_t>(text.begin(), text.end()));
  };
  write_log();

  TrainingResult result;
  result.checkpoint_path = latest.string();
  const int total = config.total_epochs();
  for (int epoch = state.epochs_completed; epoch < total; ++epoch) {
    const bool stage1 = epoch < s.stage1_epochs;
    if (!stage1 && !trainer.in_stage2()) trainer.EnterStage2();
    EpochReport report = stage1 ? trainer.Stage1Epoch(train, epoch) : trainer.Stage2Epoch(train, epoch);
    for (const SessionReport& r : report.sessions) {
      rows.push_back(std::to_string(epoch) + "," + std::to_string(report.stage) + "," +
                     SessionName(r.session) + "," + std::to_string(r.steps) + "," +
                     Number(r.loss) + "," + Number(r.bits_per_pixel) + "," + Number(r.mse) +
                     "," + Number(r.ms_clip));
    }
    write_log();
    state = CheckpointState{stage1 ? "stage1" : "stage2", epoch + 1};
    const std::vector<uint8_t> bytes = SerializeArchive(MakeCheckpoint(trainer, state));
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%04d.ugta", epoch + 1);
    WriteFileBytes((out / "checkpoints" / name).string(), bytes);
    WriteFileBytes(latest.string(), bytes);
    if (hooks.on_epoch) hooks.on_epoch(report);
    result.epochs.push_back(std::move(report));
  }
  if (!fs::exists(latest)) SaveCheckpoint(latest.string(), trainer, state);
  result.state = state;
  return result;
}

}  // namespace ugicm
