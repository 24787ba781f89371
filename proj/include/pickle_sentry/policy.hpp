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

// Allow/deny lists for the import-based baseline scanner.

#ifndef PICKLE_SENTRY_POLICY_HPP_
#define PICKLE_SENTRY_POLICY_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pickle_sentry/disasm.hpp"

namespace pickle_sentry {

enum class Verdict : std::uint8_t { kBenign, kSuspicious, kMalicious, kScanError };

// "benign", "suspicious", "malicious", "scan-error".
std::string_view to_string(Verdict verdict);

// "os.*" matches module os and its submodules; "builtins.eval" (or
// "builtins:eval") matches one name.
struct ImportPattern {
  std::string module;
  std::optional<std::string> name;

  static ImportPattern parse(std::string_view text);
  std::string str() const;
  bool matches(const ImportPair& import) const;
  bool operator==(const ImportPattern&) const = default;
};

struct ImportPolicy {
  std::vector<ImportPattern> deny;
  // Exact pairs that override deny.
  std::vector<ImportPair> allow;
  std::vector<ImportPattern> dual_use;

  static ImportPolicy defaults();

  // Throws ErrorCode::kPolicyConflict when an allowed pair is also denied
  // by name.
  void validate() const;
};

// {"deny": [...], "allow": [...], "dual_use": [...], "extend_defaults": true}.
// With extend_defaults (the default) the lists add to defaults().
ImportPolicy policy_from_json(std::string_view text);
ImportPolicy load_policy(const std::filesystem::path& path);

// Py2 module aliases mapped to their Python 3 names.
ImportPair normalize_import(const ImportPair& import);

// malicious on a deny hit not overridden by allow, suspicious on a dual-use
// hit or an unresolved ("?") import, benign otherwise.
Verdict rule_scan(std::span<const ImportPair> imports, const ImportPolicy& policy);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_POLICY_HPP_
