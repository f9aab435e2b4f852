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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.h"
#include "ugicm/archive.h"
#include "ugicm/bitstream.h"
#include "ugicm/dataset.h"
#include "ugicm/digest.h"
#include "ugicm/evaluation.h"
#include "ugicm/image_io.h"
#include "ugicm/synth.h"
#include "ugicm/training.h"

namespace ugicm {
namespace {

namespace fs = std::filesystem;
using testing::ThrownKind;

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ugicm_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrainingConfig SmallConfig(double lambda = 0.0067) {
  TrainingConfig c;
  c.codec.channels = 8;
  c.codec.latent_channels = 8;
  c.schedule.lambda = c.codec.lambda = lambda;
  c.schedule.batch_size = 4;
  c.schedule.patch_size = 32;
  return c;
}

// Untrained checkpoint of the small codec.
std::string SmallCheckpoint(const fs::path& dir, double lambda = 0.0067) {
  const TrainingConfig c = SmallConfig(lambda);
  const auto model = MakeEmbeddingModel("tiny-test", "");
  Trainer trainer(c, Codec(c.codec, 4), *model);
  const std::string path = (dir / "model.ugta").string();
  SaveCheckpoint(path, trainer, {});
  return path;
}

std::string TestSet(const fs::path& dir, int count) {
  SynthSpec spec;
  spec.train = 0;
  spec.test = count;
  spec.height = 40;
  spec.width = 56;
  spec.seed = 3;
  GenerateSyntheticDataset(dir.string(), spec);
  return dir.string();
}

TEST(Synthetic, DeterministicPerSeed) {
  EXPECT_EQ(SyntheticImage(24, 30, 5).vec(), SyntheticImage(24, 30, 5).vec());
  EXPECT_NE(SyntheticImage(24, 30, 5).vec(), SyntheticImage(24, 30, 6).vec());
  const Tensor t = SyntheticImage(24, 30, 5);
  EXPECT_EQ(QuantizeTo8Bit(t).vec(), t.vec());
}

TEST(Manifest, VerifiesDigestsAndSplits) {
  const fs::path dir = Scratch("manifest");
  TestSet(dir, 3);
  const DatasetManifest m = LoadManifest(dir.string());
  EXPECT_EQ(m.Split("test").size(), 3u);
  EXPECT_TRUE(m.Split("train").empty());
  EXPECT_EQ(m.entries[0].height, 40);

  WritePng((dir / "test_00001.png").string(), SyntheticImage(40, 56, 99));
  EXPECT_EQ(ThrownKind([&] { LoadManifest(dir.string()); }), ErrorKind::kDigestMismatch);

  fs::remove(dir / kManifestFile);
  const DatasetManifest scanned = LoadManifest(dir.string());
  EXPECT_EQ(scanned.Split("test").size(), 3u);
  EXPECT_EQ(scanned.entries[2].file, "test_00002.png");
  EXPECT_EQ(ThrownKind([&] { LoadManifest((dir / "missing").string()); }), ErrorKind::kNotFound);
}

TEST(ImageSet, BatchesCropFlipAndPad) {
  const fs::path dir = Scratch("imageset");
  TestSet(dir, 2);
  const ImageSet set(LoadManifest(dir.string()), "test");
  ASSERT_EQ(set.size(), 2u);
  Rng a(1), b(1);
  const Tensor x = set.Batch({0, 1}, 32, a);
  EXPECT_EQ(x.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(x.vec(), set.Batch({0, 1}, 32, b).vec());
  Rng c(2);
  const Tensor padded = set.Batch({0}, 64, c);
  EXPECT_EQ(padded.shape(), (Shape{1, 3, 64, 64}));
  // Rows past the image bottom replicate the last row.
  EXPECT_EQ(padded.at(0, 1, 63, 5), padded.at(0, 1, 39, 5));
}

TEST(CompressFile, BitstreamIsIndependentOfPreference) {
  const fs::path dir = Scratch("unified");
  const std::string ckpt = SmallCheckpoint(dir);
  const std::string image = (dir / "in.png").string();
  WritePng(image, SyntheticImage(40, 56, 8));
  const CompressStats s = CompressFile(image, ckpt, (dir / "a.ugic").string());
  CompressFile(image, ckpt, (dir / "b.ugic").string());
  EXPECT_EQ(ReadFileBytes((dir / "a.ugic").string()), ReadFileBytes((dir / "b.ugic").string()));
  EXPECT_EQ(s.bpp_actual, 8.0 * s.bytes / (40.0 * 56.0));
  EXPECT_EQ(s.bytes, fs::file_size(dir / "a.ugic"));

  const Tensor h = DecompressFile((dir / "a.ugic").string(), ckpt, PreferenceCondition::Human(),
                                  (dir / "h.png").string());
  const Tensor m = DecompressFile((dir / "a.ugic").string(), ckpt, PreferenceCondition::Machine(),
                                  (dir / "m.png").string());
  EXPECT_EQ(h.shape(), (Shape{1, 3, 40, 56}));
  // PCDM starts as the identity, so an untrained codec decodes both alike.
  EXPECT_EQ(h.vec(), m.vec());
  EXPECT_EQ(ReadPng((dir / "h.png").string()).shape(), h.shape());
}

TEST(CompressFile, RejectsMismatchedCheckpoint) {
  const fs::path dir = Scratch("mismatch");
  const std::string ckpt = SmallCheckpoint(dir);
  fs::create_directories(dir / "other");
  const std::string other = SmallCheckpoint(dir / "other", 0.013);
  WritePng((dir / "in.png").string(), SyntheticImage(32, 32, 8));
  CompressFile((dir / "in.png").string(), ckpt, (dir / "s.ugic").string());
  EXPECT_EQ(ThrownKind([&] {
              DecompressFile((dir / "s.ugic").string(), other, PreferenceCondition::Human(),
                             (dir / "o.png").string());
            }),
            ErrorKind::kDigestMismatch);
}

TEST(EvaluateModel, DeterministicAndReparsable) {
  const fs::path dir = Scratch("report");
  const std::string ckpt = SmallCheckpoint(dir);
  const std::string data = TestSet(dir / "data", 3);
  const RdReport a = EvaluateModel(ckpt, data, {});
  const RdReport b = EvaluateModel(ckpt, data, {});
  ASSERT_EQ(a.records.size(), 3u);
  EXPECT_EQ(FormatReportCsv(a), FormatReportCsv(b));
  EXPECT_EQ(a.records[0].file, "test_00000.png");
  EXPECT_EQ(a.backbone, "tiny-test");
  EXPECT_EQ(a.lambda, 0.0067);
  EXPECT_EQ(a.checkpoint_digest, DigestHex(DigestBytes(ReadFileBytes(ckpt))));
  EXPECT_NE(a.preprocess.find("32x32"), std::string::npos);
  for (const RdRecord& r : a.records) {
    EXPECT_GT(r.bpp_actual, r.bpp_estimated);
    EXPECT_GE(r.similarity_human, -1.0);
    EXPECT_LE(r.similarity_machine, 1.0 + 1e-12);
    EXPECT_TRUE(std::isfinite(r.ssim_human));
  }

  const RdReport parsed = ParseReportCsv(FormatReportCsv(a));
  EXPECT_EQ(FormatReportCsv(parsed), FormatReportCsv(a));
  for (const std::string& m : kRdMetrics) EXPECT_EQ(parsed.Mean(m), a.Mean(m)) << m;
}

TEST(EvaluateModel, EmptyManifestGivesEmptyReport) {
  const fs::path dir = Scratch("empty");
  const std::string ckpt = SmallCheckpoint(dir);
  DatasetManifest m;
  m.root = (dir / "data").string();
  fs::create_directories(m.root);
  WriteManifest(m);
  const RdReport r = EvaluateModel(ckpt, m.root, {});
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(std::isnan(r.Mean("psnr_human")));
  EXPECT_TRUE(ParseReportCsv(FormatReportCsv(r)).records.empty());
}

TEST(EvaluateModel, RunsExternalEvaluator) {
  const fs::path dir = Scratch("external");
  const std::string ckpt = SmallCheckpoint(dir);
  const std::string data = TestSet(dir / "data", 2);
  const fs::path script = dir / "count.sh";
  std::ofstream(script) << "#!/bin/sh\necho scanning\nls \"$1\" | wc -l\n";
  fs::permissions(script, fs::perms::owner_all);
  EvalOptions opts;
  opts.external_command = script.string();
  opts.work_dir = (dir / "recon").string();
  const RdReport r = EvaluateModel(ckpt, data, opts);
  EXPECT_EQ(r.external_human, 2.0);
  EXPECT_EQ(r.external_machine, 2.0);
  EXPECT_TRUE(fs::exists(dir / "recon" / "machine" / "test_00001.png"));
  EXPECT_EQ(ThrownKind([&] { RunExternalEvaluator("false", dir.string()); }), ErrorKind::kIo);
}

TEST(PlotRd, OneRowPerReportPerMetric) {
  const fs::path dir = Scratch("plot");
  std::vector<RdReport> reports;
  for (double lambda : {0.013, 0.0018, 0.0067, 0.0035}) {
    RdReport r;
    r.lambda = lambda;
    RdRecord rec;
    rec.file = "a.png";
    rec.bpp_actual = lambda * 100;
    rec.psnr_human = 20 + lambda * 1000;
    rec.similarity_machine = 0.5 + lambda;
    r.records.push_back(rec);
    reports.push_back(r);
  }
  const std::vector<std::string> paths = PlotRd(reports, dir.string());
  ASSERT_EQ(paths.size(), 6u);
  for (const std::string& p : paths) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 5u) << p;
    EXPECT_TRUE(lines[1].starts_with("0.0018"));
    EXPECT_TRUE(fs::exists(fs::path(p).replace_extension(".svg")));
  }
  std::ifstream in(dir / "rd_psnr_human.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "lambda,bpp,psnr_human");
  double lambda = 0, bpp = 0, psnr = 0;
  ASSERT_EQ(std::sscanf(row.c_str(), "%lf,%lf,%lf", &lambda, &bpp, &psnr), 3);
  EXPECT_EQ(lambda, 0.0018);
  EXPECT_EQ(bpp, 0.0018 * 100);
  EXPECT_EQ(psnr, 20 + 0.0018 * 1000);
}

}  // namespace
}  // namespace ugicm
