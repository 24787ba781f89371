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

// File scanning pipeline: unwrap, disassemble, featurize, classify, and
// fuse with the import rules.

#ifndef PICKLE_SENTRY_SCAN_HPP_
#define PICKLE_SENTRY_SCAN_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pickle_sentry/mlcore.hpp"
#include "pickle_sentry/policy.hpp"
#include "pickle_sentry/unwrap.hpp"

namespace pickle_sentry {

struct ScanOptions {
  // Rule-only scanning when null.
  std::shared_ptr<const TrainedModel> model;
  ImportPolicy policy = ImportPolicy::defaults();
  UnwrapLimits limits;
  // Ignore the rule verdict when deciding "malicious".
  bool ml_only = false;
  // Larger files are reported as scan-error without being read.
  std::uint64_t max_file_bytes = 4ull << 30;
  // scan_tree workers; 0 = hardware concurrency.
  unsigned jobs = 0;
};

struct CandidateRecord {
  std::vector<OriginStep> origin_chain;
  bool well_formed = false;
  std::size_t segments = 0;
  std::uint64_t opcodes = 0;
  std::vector<ImportPair> imports;
  Verdict rule_verdict = Verdict::kBenign;
  std::optional<double> ml_score;
  std::optional<Verdict> ml_verdict;
  double oov_mass = 0.0;
  // Why this candidate could not be classified, if it could not.
  std::optional<std::string> error;
};

struct ScanReport {
  std::string path;
  std::vector<CandidateRecord> candidates;
  Verdict file_verdict = Verdict::kScanError;
  double elapsed_ms = 0.0;
  std::vector<UnwrapIssue> issues;
  // Read or pipeline failure that prevented a scan.
  std::optional<std::string> error;
};

// Scans bytes already in memory; `path` is only copied into the report.
ScanReport scan_bytes(std::string_view data, std::string path, const ScanOptions& options);

// Never throws for per-file problems; they become scan-error reports.
ScanReport scan_file(const std::filesystem::path& path, const ScanOptions& options);

// Every non-directory entry under `root` (or `root` itself when it is not
// a directory), in lexicographic path order.
std::vector<ScanReport> scan_tree(const std::filesystem::path& root, const ScanOptions& options);

// One JSON object, no trailing newline, fixed key order.
std::string to_json_line(const ScanReport& report);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_SCAN_HPP_
