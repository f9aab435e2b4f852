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

#ifndef UGICM_EVALUATION_H_
#define UGICM_EVALUATION_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ugicm/codec.h"
#include "ugicm/embedding.h"
#include "ugicm/tensor.h"

namespace ugicm {

struct CompressStats {
  int height = 0;
  int width = 0;
  size_t bytes = 0;
  double bpp_actual = 0.0;     // 8 * bytes / (height * width), original size
  double bpp_estimated = 0.0;  // rate model estimate over the same pixels
};

CompressStats CompressFile(const std::string& image_path, const std::string& checkpoint_path,
                           const std::string& out_path);
// Writes an 8-bit PNG and returns the decoded image before quantization.
Tensor DecompressFile(const std::string& stream_path, const std::string& checkpoint_path,
                      const PreferenceCondition& beta, const std::string& out_path);

// Cosine similarity of the embeddings of two single images.
double EmbeddingSimilarity(const EmbeddingModel& model, const Tensor& a, const Tensor& b);

struct RdRecord {
  std::string file;
  double bpp_estimated = 0.0;
  double bpp_actual = 0.0;
  double psnr_human = 0.0;
  double psnr_machine = 0.0;
  double ssim_human = 0.0;  // NaN for images smaller than the SSIM window
  double ssim_machine = 0.0;
  double similarity_human = 0.0;
  double similarity_machine = 0.0;
};

inline const std::vector<std::string> kRdMetrics = {
    "bpp_estimated", "bpp_actual",  "psnr_human",       "psnr_machine",
    "ssim_human",    "ssim_machine", "similarity_human", "similarity_machine"};

double RecordValue(const RdRecord& r, const std::string& metric);

struct RdReport {
  std::vector<RdRecord> records;  // sorted by file name
  double lambda = 0.0;
  std::string checkpoint_digest;
  std::string backbone;
  std::string preprocess;
  // Scores from an external evaluator per preference, NaN when unused.
  double external_human = 0.0;
  double external_machine = 0.0;

  // Mean over records; NaN when empty.
  double Mean(const std::string& metric) const;
};

struct EvalOptions {
  std::string split = "test";
  std::string backbone = "tiny-test";
  std::string backbone_weights;
  int limit = 0;  // 0 evaluates the whole split
  // Optional command run as `command DIR` on a directory of reconstructions
  // for each preference; the last line of its stdout is a number.
  std::string external_command;
  std::string work_dir;  // where reconstructions go for the external command
};

RdReport EvaluateModel(const std::string& checkpoint_path, const std::string& data_dir,
                       const EvalOptions& options);

// Runs `command dir` and parses the last stdout line as a number (kIo on
// failure).
double RunExternalEvaluator(const std::string& command, const std::string& dir);

// CSV with "# key=value" metadata lines, a header and one row per record.
std::string FormatReportCsv(const RdReport& report);
RdReport ParseReportCsv(const std::string& text);
void WriteReport(const std::string& path, const RdReport& report);
RdReport ReadReport(const std::string& path);

// For every quality metric writes rd_<metric>.csv with (lambda, bpp, value)
// rows sorted by lambda and an SVG curve rd_<metric>.svg. Returns the CSV
// paths.
std::vector<std::string> PlotRd(const std::vector<RdReport>& reports, const std::string& out_dir);

}  // namespace ugicm

#endif  // UGICM_EVALUATION_H_
