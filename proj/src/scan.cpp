// Copyright 2026 The pickle-sentry Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pickle_sentry/scan.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <system_error>

#include <json.hpp>

#include "parallel.hpp"
#include "pickle_sentry/decompiler.hpp"
#include "pickle_sentry/error.hpp"

namespace pickle_sentry {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

CandidateRecord examine(const PickleCandidate& candidate, const ScanOptions& options) {
  CandidateRecord rec;
  rec.origin_chain = candidate.origin_chain;
  const std::string& bytes = *candidate.bytes;
  if (bytes.empty()) {
    rec.error = "empty payload";
    return rec;
  }
  auto segments = disassemble_all(bytes);
  rec.segments = segments.size();
  rec.opcodes = total_events(segments);
  rec.well_formed = std::all_of(segments.begin(), segments.end(),
                                [](const Disassembly& d) { return d.well_formed; });
  rec.imports = extract_imports(segments);
  rec.rule_verdict = rule_scan(rec.imports, options.policy);
  if (rec.opcodes == 0) {
    rec.error = "no decodable opcodes";
    return rec;
  }
  if (options.model) {
    FeatureVector v = extract(segments);
    rec.oov_mass = project(v, options.model->projection).oov_mass;
    Prediction p = predict(*options.model, v);
    rec.ml_score = p.score;
    rec.ml_verdict = p.verdict == Label::kMalicious ? Verdict::kMalicious : Verdict::kBenign;
  }
  return rec;
}

Verdict fuse(const ScanReport& report, bool incomplete, bool ml_only) {
  bool suspicious = false;
  for (const auto& c : report.candidates) {
    if (c.ml_verdict == Verdict::kMalicious) return Verdict::kMalicious;
    if (!ml_only && c.rule_verdict == Verdict::kMalicious) return Verdict::kMalicious;
    if (c.oov_mass > 0.0 || !c.well_formed || c.error || c.rule_verdict == Verdict::kSuspicious) {
      suspicious = true;
    }
  }
  if (incomplete || report.candidates.empty()) return Verdict::kScanError;
  if (suspicious || !report.issues.empty()) return Verdict::kSuspicious;
  return Verdict::kBenign;
}

ScanReport failed(std::string path, std::string error, Clock::time_point start) {
  ScanReport r;
  r.path = std::move(path);
  r.error = std::move(error);
  r.file_verdict = Verdict::kScanError;
  r.elapsed_ms = ms_since(start);
  return r;
}

ScanReport scan_bytes_from(std::string_view data, std::string path, const ScanOptions& options,
                           Clock::time_point start) {
  if (data.empty()) return failed(std::move(path), "empty file", start);
  ScanReport report;
  report.path = std::move(path);
  try {
    UnwrapResult unwrapped = unwrap(data, options.limits);
    report.issues = unwrapped.issues();
    report.candidates.reserve(unwrapped.candidates.size());
    for (const auto& c : unwrapped.candidates) report.candidates.push_back(examine(c, options));
    report.file_verdict = fuse(report, unwrapped.hit_limit(), options.ml_only);
  } catch (const std::exception& e) {
    return failed(std::move(report.path), e.what(), start);
  }
  report.elapsed_ms = ms_since(start);
  return report;
}

}  // namespace

ScanReport scan_bytes(std::string_view data, std::string path, const ScanOptions& options) {
  return scan_bytes_from(data, std::move(path), options, Clock::now());
}

ScanReport scan_file(const std::filesystem::path& path, const ScanOptions& options) {
  auto start = Clock::now();
  std::string name = path.string();
  std::error_code ec;
  auto status = std::filesystem::status(path, ec);
  if (ec) return failed(std::move(name), "cannot stat: " + ec.message(), start);
  if (!std::filesystem::is_regular_file(status)) {
    return failed(std::move(name), "not a regular file", start);
  }
  auto size = std::filesystem::file_size(path, ec);
  if (ec) return failed(std::move(name), "cannot stat: " + ec.message(), start);
  if (size > options.max_file_bytes) {
    return failed(std::move(name), "file larger than " + std::to_string(options.max_file_bytes) +
                                       " bytes",
                  start);
  }
  std::string data;
  try {
    std::ifstream in(path, std::ios::binary);
    if (!in) return failed(std::move(name), "cannot open for reading", start);
    data.resize(static_cast<std::size_t>(size));
    in.read(data.data(), static_cast<std::streamsize>(size));
    if (in.gcount() != static_cast<std::streamsize>(size)) {
      return failed(std::move(name), "short read", start);
    }
  } catch (const std::exception& e) {
    return failed(std::move(name), e.what(), start);
  }
  return scan_bytes_from(data, std::move(name), options, start);
}

std::vector<ScanReport> scan_tree(const std::filesystem::path& root, const ScanOptions& options) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::vector<ScanReport> listing_errors;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    files.push_back(root);
  } else {
    fs::recursive_directory_iterator it(root, ec), end;
    if (ec) {
      listing_errors.push_back(failed(root.string(), "cannot list: " + ec.message(), Clock::now()));
    }
    for (; !ec && it != end; it.increment(ec)) {
      std::error_code type_ec;
      if (it->is_directory(type_ec) && !it->is_symlink(type_ec)) continue;
      files.push_back(it->path());
    }
    if (ec) {
      listing_errors.push_back(
          failed(root.string(), "directory walk stopped: " + ec.message(), Clock::now()));
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });

  std::vector<ScanReport> reports(files.size());
  parallel_for(files.size(), options.jobs, [&](std::size_t i) {
    try {
      reports[i] = scan_file(files[i], options);
    } catch (const std::exception& e) {
      reports[i] = failed(files[i].string(), e.what(), Clock::now());
    }
  });
  reports.insert(reports.end(), std::make_move_iterator(listing_errors.begin()),
                 std::make_move_iterator(listing_errors.end()));
  return reports;
}

std::string to_json_line(const ScanReport& report) {
  using Json = nlohmann::ordered_json;
  Json candidates = Json::array();
  for (const auto& c : report.candidates) {
    Json chain = Json::array();
    for (const auto& step : c.origin_chain) {
      chain.push_back(Json{{"kind", std::string(to_string(step.kind))}, {"entry", step.entry_path}});
    }
    Json imports = Json::array();
    for (const auto& i : c.imports) imports.push_back(Json::array({i.module, i.name}));
    candidates.push_back(Json{
        {"origin_chain", std::move(chain)},
        {"well_formed", c.well_formed},
        {"segments", c.segments},
        {"opcodes", c.opcodes},
        {"imports", std::move(imports)},
        {"rule_verdict", std::string(to_string(c.rule_verdict))},
        {"ml_score", c.ml_score ? Json(*c.ml_score) : Json(nullptr)},
        {"ml_verdict", c.ml_verdict ? Json(std::string(to_string(*c.ml_verdict))) : Json(nullptr)},
        {"oov_mass", c.oov_mass},
        {"error", c.error ? Json(*c.error) : Json(nullptr)},
    });
  }
  Json issues = Json::array();
  for (const auto& i : report.issues) {
    issues.push_back(Json{{"code", std::string(to_string(i.code))}, {"message", i.message}});
  }
  Json j{
      {"path", report.path},
      {"candidates", std::move(candidates)},
      {"file_verdict", std::string(to_string(report.file_verdict))},
      {"elapsed_ms", report.elapsed_ms},
      {"issues", std::move(issues)},
      {"error", report.error ? Json(*report.error) : Json(nullptr)},
  };
  // Invalid UTF-8 in names is replaced instead of aborting the dump.
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

}  // namespace pickle_sentry
