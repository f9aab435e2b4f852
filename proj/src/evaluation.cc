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

#include "ugicm/evaluation.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "ugicm/archive.h"
#include "ugicm/bitstream.h"
#include "ugicm/compression.h"
#include "ugicm/dataset.h"
#include "ugicm/digest.h"
#include "ugicm/errors.h"
#include "ugicm/image_io.h"
#include "ugicm/metrics.h"
#include "ugicm/ops.h"
#include "ugicm/training.h"

namespace ugicm {
namespace {

namespace fs = std::filesystem;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kQualityMetrics = {"psnr_human",       "psnr_machine",
                                                  "ssim_human",       "ssim_machine",
                                                  "similarity_human", "similarity_machine"};

std::string Number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseNumber(const std::string& s) {
  if (s == "nan" || s == "-nan") return kNaN;
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    Fail(ErrorKind::kCorruptStream, "bad number '" + s + "' in report");
  }
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double SsimOrNaN(const Tensor& a, const Tensor& b) {
  const Shape& s = a.shape();
  return std::min(s.h, s.w) < kSsimWindow ? kNaN : Ssim(a, b);
}

std::string Text(const std::vector<uint8_t>& bytes) { return std::string(bytes.begin(), bytes.end()); }

}  // namespace

CompressStats CompressFile(const std::string& image_path, const std::string& checkpoint_path,
                           const std::string& out_path) {
  const Codec codec = LoadCheckpoint(checkpoint_path).MakeCodec();
  const Tensor image = ReadPng(image_path);
  const CompressResult r = CompressImage(codec, image);
  const std::vector<uint8_t> bytes = PackBitstream(r.stream);
  WriteFileBytes(out_path, bytes);
  CompressStats s;
  s.height = image.shape().h;
  s.width = image.shape().w;
  s.bytes = bytes.size();
  const double pixels = static_cast<double>(s.height) * s.width;
  s.bpp_actual = 8.0 * bytes.size() / pixels;
  s.bpp_estimated = r.estimated_bits / pixels;
  return s;
}

Tensor DecompressFile(const std::string& stream_path, const std::string& checkpoint_path,
                      const PreferenceCondition& beta, const std::string& out_path) {
  const Codec codec = LoadCheckpoint(checkpoint_path).MakeCodec();
  const std::vector<uint8_t> bytes = ReadFileBytes(stream_path);
  const DecompressResult r = DecompressImage(codec, UnpackBitstream(bytes), beta);
  WritePng(out_path, r.image);
  return r.image;
}

double EmbeddingSimilarity(const EmbeddingModel& model, const Tensor& a, const Tensor& b) {
  NoGradGuard guard;
  const Tensor e = model.Embed(Var::Constant(Stack(std::array{a, b}))).value();
  const int d = e.shape().c;
  double dot = 0.0;
  for (int i = 0; i < d; ++i) dot += e[i] * e[d + i];
  return dot;
}

double RecordValue(const RdRecord& r, const std::string& metric) {
  if (metric == "bpp_estimated") return r.bpp_estimated;
  if (metric == "bpp_actual") return r.bpp_actual;
  if (metric == "psnr_human") return r.psnr_human;
  if (metric == "psnr_machine") return r.psnr_machine;
  if (metric == "ssim_human") return r.ssim_human;
  if (metric == "ssim_machine") return r.ssim_machine;
  if (metric == "similarity_human") return r.similarity_human;
  if (metric == "similarity_machine") return r.similarity_machine;
  Fail(ErrorKind::kInvalidConfig, "unknown metric '" + metric + "'");
}

double RdReport::Mean(const std::string& metric) const {
  if (records.empty()) return kNaN;
  double sum = 0.0;
  for (const RdRecord& r : records) sum += RecordValue(r, metric);
  return sum / static_cast<double>(records.size());
}

RdReport EvaluateModel(const std::string& checkpoint_path, const std::string& data_dir,
                       const EvalOptions& options) {
  const LoadedCheckpoint ckpt = LoadCheckpoint(checkpoint_path);
  const Codec codec = ckpt.MakeCodec();
  const std::unique_ptr<EmbeddingModel> model =
      MakeEmbeddingModel(options.backbone, options.backbone_weights);
  const DatasetManifest manifest = LoadManifest(data_dir);
  std::vector<ManifestEntry> entries = manifest.Split(options.split);
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.file < b.file; });
  if (options.limit > 0 && entries.size() > static_cast<size_t>(options.limit)) {
    entries.resize(options.limit);
  }

  RdReport report;
  report.lambda = ckpt.codec_config.lambda;
  report.checkpoint_digest = DigestHex(ckpt.file_digest);
  report.backbone = model->name();
  report.preprocess = model->preprocess().Describe();
  report.external_human = report.external_machine = kNaN;
  const bool external = !options.external_command.empty();
  const fs::path work = options.work_dir.empty() ? fs::path(data_dir) / "eval_recon"
                                                 : fs::path(options.work_dir);

  for (const ManifestEntry& e : entries) {
    const Tensor x = ReadPng((fs::path(manifest.root) / e.file).string());
    const CompressResult c = CompressImage(codec, x);
    const std::vector<uint8_t> bytes = PackBitstream(c.stream);
    const Bitstream stream = UnpackBitstream(bytes);
    const double pixels = static_cast<double>(x.shape().h) * x.shape().w;
    RdRecord r;
    r.file = e.file;
    r.bpp_actual = 8.0 * bytes.size() / pixels;
    r.bpp_estimated = c.estimated_bits / pixels;
    for (const PreferenceCondition beta :
         {PreferenceCondition::Human(), PreferenceCondition::Machine()}) {
      const Tensor xhat = QuantizeTo8Bit(DecompressImage(codec, stream, beta).image);
      const double psnr = Psnr(x, xhat);
      const double ssim = SsimOrNaN(x, xhat);
      const double sim = EmbeddingSimilarity(*model, x, xhat);
      if (beta.is_machine()) {
        r.psnr_machine = psnr, r.ssim_machine = ssim, r.similarity_machine = sim;
      } else {
        r.psnr_human = psnr, r.ssim_human = ssim, r.similarity_human = sim;
      }
      if (external) WritePng((work / beta.name() / e.file).string(), xhat);
    }
    report.records.push_back(std::move(r));
  }
  if (external && !entries.empty()) {
    report.external_human = RunExternalEvaluator(options.external_command, (work / "human").string());
    report.external_machine =
        RunExternalEvaluator(options.external_command, (work / "machine").string());
  }
  return report;
}

double RunExternalEvaluator(const std::string& command, const std::string& dir) {
  const std::string full = command + " '" + dir + "'";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(full.c_str(), "r"), pclose);
  if (!pipe) Fail(ErrorKind::kIo, "cannot start external evaluator");
  std::string output;
  std::array<char, 256> buf;
  while (fgets(buf.data(), buf.size(), pipe.get()) != nullptr) output += buf.data();
  const int status = pclose(pipe.release());
  if (status != 0) Fail(ErrorKind::kIo, "external evaluator exited with status " + std::to_string(status));
  while (!output.empty() && (output.back() == '\n' || output.back() == '\r')) output.pop_back();
  const std::string last = output.substr(output.find_last_of('\n') == std::string::npos
                                             ? 0
                                             : output.find_last_of('\n') + 1);
  try {
    return std::stod(last);
  } catch (const std::exception&) {
    Fail(ErrorKind::kIo, "external evaluator printed '" + last + "', expected a number");
  }
}

std::string FormatReportCsv(const RdReport& report) {
  std::ostringstream os;
  os << "# lambda=" << Number(report.lambda) << "\n"
     << "# checkpoint_digest=" << report.checkpoint_digest << "\n"
     << "# backbone=" << report.backbone << "\n"
     << "# preprocess=" << report.preprocess << "\n"
     << "# external_human=" << Number(report.external_human) << "\n"
     << "# external_machine=" << Number(report.external_machine) << "\n"
     << "# images=" << report.records.size() << "\n";
  for (const std::string& m : kRdMetrics) os << "# mean_" << m << "=" << Number(report.Mean(m)) << "\n";
  os << "file";
  for (const std::string& m : kRdMetrics) os << "," << m;
  os << "\n";
  for (const RdRecord& r : report.records) {
    os << r.file;
    for (const std::string& m : kRdMetrics) os << "," << Number(RecordValue(r, m));
    os << "\n";
  }
  return os.str();
}

RdReport ParseReportCsv(const std::string& text) {
  RdReport report;
  std::stringstream ss(text);
  std::string line;
  bool header = false;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    if (line.starts_with("# ")) {
      const size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (key == "lambda") report.lambda = ParseNumber(value);
      if (key == "checkpoint_digest") report.checkpoint_digest = value;
      if (key == "backbone") report.backbone = value;
      if (key == "preprocess") report.preprocess = value;
      if (key == "external_human") report.external_human = ParseNumber(value);
      if (key == "external_machine") report.external_machine = ParseNumber(value);
      continue;
    }
    const std::vector<std::string> cells = SplitCsv(line);
    if (!header) {
      if (cells.size() != kRdMetrics.size() + 1 || cells[0] != "file") {
        Fail(ErrorKind::kCorruptStream, "unexpected report header");
      }
      header = true;
      continue;
    }
    if (cells.size() != kRdMetrics.size() + 1) {
      Fail(ErrorKind::kCorruptStream, "report row has " + std::to_string(cells.size()) + " cells");
    }
    RdRecord r;
    r.file = cells[0];
    std::array<double*, 8> fields = {&r.bpp_estimated,  &r.bpp_actual,       &r.psnr_human,
                                     &r.psnr_machine,   &r.ssim_human,       &r.ssim_machine,
                                     &r.similarity_human, &r.similarity_machine};
    for (size_t i = 0; i < fields.size(); ++i) *fields[i] = ParseNumber(cells[i + 1]);
    report.records.push_back(std::move(r));
  }
  if (!header) Fail(ErrorKind::kCorruptStream, "report has no header");
  return report;
}

void WriteReport(const std::string& path, const RdReport& report) {
  const std::string text = FormatReportCsv(report);
  WriteFileBytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

RdReport ReadReport(const std::string& path) { return ParseReportCsv(Text(ReadFileBytes(path))); }

std::vector<std::string> PlotRd(const std::vector<RdReport>& reports, const std::string& out_dir) {
  std::vector<const RdReport*> order;
  for (const RdReport& r : reports) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const RdReport* a, const RdReport* b) { return a->lambda < b->lambda; });
  std::vector<std::string> paths;
  for (const std::string& metric : kQualityMetrics) {
    std::string csv = "lambda,bpp," + metric + "\n";
    std::vector<std::pair<double, double>> points;
    for (const RdReport* r : order) {
      const double bpp = r->Mean("bpp_actual"), value = r->Mean(metric);
      csv += Number(r->lambda) + "," + Number(bpp) + "," + Number(value) + "\n";
      if (std::isfinite(bpp) && std::isfinite(value)) points.emplace_back(bpp, value);
    }
    const std::string csv_path = (fs::path(out_dir) / ("rd_" + metric + ".csv")).string();
    WriteFileBytes(csv_path, std::vector<uint8_t>(csv.begin(), csv.end()));
    paths.push_back(csv_path);

    // Plain SVG line chart with the data range mapped to a 400x300 frame.
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!points.empty()) {
      x0 = x1 = points[0].first;
      y0 = y1 = points[0].second;
      for (const auto& [x, y] : points) {
        x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
      if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
      if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    }
    auto px = [&](double x) { return 60 + 400 * (x - x0) / (x1 - x0); };
    auto py = [&](double y) { return 320 - 300 * (y - y0) / (y1 - y0); };
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"380\">\n"
        << "<rect width=\"500\" height=\"380\" fill=\"white\"/>\n"
        << "<line x1=\"60\" y1=\"320\" x2=\"460\" y2=\"320\" stroke=\"black\"/>\n"
        << "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"320\" stroke=\"black\"/>\n"
        << "<text x=\"260\" y=\"360\" text-anchor=\"middle\">bpp</text>\n"
        << "<text x=\"15\" y=\"170\" transform=\"rotate(-90 15 170)\" text-anchor=\"middle\">"
        << metric << "</text>\n"
        << "<text x=\"60\" y=\"338\" font-size=\"10\">" << Number(x0).substr(0, 6) << "</text>\n"
        << "<text x=\"460\" y=\"338\" font-size=\"10\" text-anchor=\"end\">"
        << Number(x1).substr(0, 6) << "</text>\n"
        << "<text x=\"56\" y=\"320\" font-size=\"10\" text-anchor=\"end\">"
        << Number(y0).substr(0, 6) << "</text>\n"
        << "<text x=\"56\" y=\"26\" font-size=\"10\" text-anchor=\"end\">"
        << Number(y1).substr(0, 6) << "</text>\n";
    if (!points.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
      for (const auto& [x, y] : points) svg << px(x) << "," << py(y) << " ";
      svg << "\"/>\n";
      for (const auto& [x, y] : points) {
        svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"steelblue\"/>\n";
      }
    }
    svg << "</svg>\n";
    const std::string s = svg.str();
    WriteFileBytes((fs::path(out_dir) / ("rd_" + metric + ".svg")).string(),
                   std::vector<uint8_t>(s.begin(), s.end()));
  }
  return paths;
}

}  // namespace ugicm
