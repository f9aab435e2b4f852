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

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <exception>
#include <string>

#include <filesystem>

#include "ugicm/errors.h"
#include "ugicm/evaluation.h"
#include "ugicm/image_io.h"
#include "ugicm/metrics.h"
#include "ugicm/refinement.h"
#include "ugicm/synth.h"
#include "ugicm/training.h"

namespace {

using namespace ugicm;

void AddSynth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic scene dataset");
  auto spec = std::make_shared<SynthSpec>();
  auto dir = std::make_shared<std::string>();
  cmd->add_option("-o,--out", *dir, "Output directory")->required();
  cmd->add_option("--train", spec->train, "Training images");
  cmd->add_option("--val", spec->val, "Validation images");
  cmd->add_option("--test", spec->test, "Test images");
  cmd->add_option("--height", spec->height, "Image height");
  cmd->add_option("--width", spec->width, "Image width");
  cmd->add_option("--seed", spec->seed, "Generator seed");
  cmd->callback([spec, dir] {
    const DatasetManifest m = GenerateSyntheticDataset(*dir, *spec);
    std::printf("wrote %zu images to %s\n", m.entries.size(), dir->c_str());
  });
}

void AddTrain(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "Run two-stage training");
  auto path = std::make_shared<std::string>();
  cmd->add_option("--config", *path, "YAML training config")->required();
  cmd->callback([path] {
    const TrainingConfig config = LoadTrainingConfig(*path);
    TrainingHooks hooks;
    hooks.on_epoch = [](const EpochReport& r) {
      for (const SessionReport& s : r.sessions) {
        std::printf("epoch %d stage %d %-7s steps %d loss %.6g bpp %.4f mse %.6g ms_clip %.6g\n",
                    r.epoch, r.stage, SessionName(s.session).c_str(), s.steps, s.loss,
                    s.bits_per_pixel, s.mse, s.ms_clip);
      }
      std::fflush(stdout);
    };
    const TrainingResult result = RunTraining(config, hooks);
    std::printf("checkpoint %s (%s, %d epochs)\n", result.checkpoint_path.c_str(),
                result.state.stage.c_str(), result.state.epochs_completed);
  });
}

void AddCompress(CLI::App& app) {
  auto* cmd = app.add_subcommand("compress", "Encode a PNG into one bitstream");
  auto in = std::make_shared<std::string>();
  auto ckpt = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("input", *in, "Input PNG")->required();
  cmd->add_option("--ckpt", *ckpt, "Checkpoint")->required();
  cmd->add_option("-o,--out", *out, "Output bitstream")->required();
  cmd->callback([in, ckpt, out] {
    const CompressStats s = CompressFile(*in, *ckpt, *out);
    std::printf("%dx%d %zu bytes %.6f bpp (estimated %.6f)\n", s.width, s.height, s.bytes,
                s.bpp_actual, s.bpp_estimated);
  });
}

void AddDecompress(CLI::App& app) {
  auto* cmd = app.add_subcommand("decompress", "Decode a bitstream for one preference");
  auto in = std::make_shared<std::string>();
  auto ckpt = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto pref = std::make_shared<std::string>("human");
  cmd->add_option("input", *in, "Bitstream")->required();
  cmd->add_option("--ckpt", *ckpt, "Checkpoint")->required();
  cmd->add_option("--preference", *pref, "human, machine, 0 or 1");
  cmd->add_option("-o,--out", *out, "Output PNG")->required();
  cmd->callback([in, ckpt, out, pref] {
    DecompressFile(*in, *ckpt, PreferenceCondition::Parse(*pref), *out);
  });
}

void AddRefine(CLI::App& app) {
  auto* cmd = app.add_subcommand("refine", "Offline sign-gradient update towards the original embedding");
  struct Args {
    std::string orig, recon, out, backbone = "tiny-test", weights;
    double delta = 8, step = 1;
    int steps = 10;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--orig", a->orig, "Original PNG or directory")->required();
  cmd->add_option("--recon", a->recon, "Reconstruction PNG or directory")->required();
  cmd->add_option("--delta", a->delta, "L-infinity radius in 8-bit levels");
  cmd->add_option("--step-size", a->step, "Step size in 8-bit levels");
  cmd->add_option("--steps", a->steps, "Number of updates");
  cmd->add_option("--backbone", a->backbone, "Embedding backbone");
  cmd->add_option("--backbone-weights", a->weights, "Backbone weights archive");
  cmd->add_option("-o,--out", a->out, "Output PNG or directory")->required();
  cmd->callback([a] {
    namespace fs = std::filesystem;
    RefinementConfig config;
    config.radius = a->delta / 255.0;
    config.step_size = a->step / 255.0;
    config.steps = a->steps;
    config.Validate();
    const auto model = MakeEmbeddingModel(a->backbone, a->weights);
    std::vector<std::array<std::string, 3>> jobs;
    if (fs::is_directory(a->orig)) {
      std::vector<std::string> names;
      for (const auto& e : fs::directory_iterator(a->recon)) {
        if (e.path().extension() == ".png") names.push_back(e.path().filename().string());
      }
      std::sort(names.begin(), names.end());
      for (const std::string& n : names) {
        jobs.push_back({(fs::path(a->orig) / n).string(), (fs::path(a->recon) / n).string(),
                        (fs::path(a->out) / n).string()});
      }
    } else {
      jobs.push_back({a->orig, a->recon, a->out});
    }
    std::printf("file,similarity_before,similarity_after,psnr_before,psnr_after\n");
    for (const auto& [orig, recon, out] : jobs) {
      const Tensor x = ReadPng(orig), xhat = ReadPng(recon);
      const Tensor refined = QuantizeTo8Bit(Refine(x, xhat, config, *model));
      WritePng(out, refined);
      std::printf("%s,%.17g,%.17g,%.17g,%.17g\n", fs::path(recon).filename().c_str(),
                  EmbeddingSimilarity(*model, x, xhat), EmbeddingSimilarity(*model, x, refined),
                  Psnr(x, xhat), Psnr(x, refined));
    }
  });
}

void AddEval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "Rate, distortion and embedding similarity report");
  auto ckpt = std::make_shared<std::string>();
  auto data = std::make_shared<std::string>();
  auto report = std::make_shared<std::string>();
  auto opts = std::make_shared<EvalOptions>();
  cmd->add_option("--ckpt", *ckpt, "Checkpoint")->required();
  cmd->add_option("--data", *data, "Dataset directory")->required();
  cmd->add_option("--report", *report, "Output CSV")->required();
  cmd->add_option("--split", opts->split, "Manifest split");
  cmd->add_option("--limit", opts->limit, "Evaluate at most this many images");
  cmd->add_option("--backbone", opts->backbone, "Embedding backbone");
  cmd->add_option("--backbone-weights", opts->backbone_weights, "Backbone weights archive");
  cmd->add_option("--external", opts->external_command, "External evaluator command");
  cmd->add_option("--work-dir", opts->work_dir, "Reconstruction directory for --external");
  cmd->callback([ckpt, data, report, opts] {
    const RdReport r = EvaluateModel(*ckpt, *data, *opts);
    WriteReport(*report, r);
    std::printf("%zu images: bpp %.4f psnr %.3f/%.3f similarity %.5f/%.5f (human/machine)\n",
                r.records.size(), r.Mean("bpp_actual"), r.Mean("psnr_human"),
                r.Mean("psnr_machine"), r.Mean("similarity_human"), r.Mean("similarity_machine"));
  });
}

void AddPlot(CLI::App& app) {
  auto* cmd = app.add_subcommand("plot", "Rate-distortion curves from eval reports");
  auto reports = std::make_shared<std::vector<std::string>>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--reports", *reports, "Report CSVs")->required();
  cmd->add_option("-o,--out", *out, "Output directory")->required();
  cmd->callback([reports, out] {
    std::vector<RdReport> loaded;
    for (const std::string& p : *reports) loaded.push_back(ReadReport(p));
    for (const std::string& p : PlotRd(loaded, *out)) std::printf("%s\n", p.c_str());
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified image codec for human and machine consumers"};
  app.require_subcommand(1);
  AddSynth(app);
  AddTrain(app);
  AddCompress(app);
  AddDecompress(app);
  AddRefine(app);
  AddEval(app);
  AddPlot(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", std::string(ErrorKindName(e.kind())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal: %s\n", e.what());
    return 3;
  }
  return 0;
}
