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

#include "pickle_sentry/policy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pickle_sentry/error.hpp"

namespace pickle_sentry {

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kBenign: return "benign";
    case Verdict::kSuspicious: return "suspicious";
    case Verdict::kMalicious: return "malicious";
    case Verdict::kScanError: return "scan-error";
  }
  return "?";
}

ImportPattern ImportPattern::parse(std::string_view text) {
  auto bad = [&] { return Error(ErrorCode::kInvalidArgument, "bad import pattern '" + std::string(text) + "'"); };
  if (text.ends_with(".*")) {
    auto module = text.substr(0, text.size() - 2);
    if (module.empty()) throw bad();
    return {std::string(module), std::nullopt};
  }
  auto colon = text.find(':');
  auto cut = colon != std::string_view::npos ? colon : text.rfind('.');
  if (cut == std::string_view::npos || cut == 0 || cut + 1 >= text.size()) throw bad();
  return {std::string(text.substr(0, cut)), std::string(text.substr(cut + 1))};
}

std::string ImportPattern::str() const {
  return name ? module + "." + *name : module + ".*";
}

bool ImportPattern::matches(const ImportPair& import) const {
  if (!name) {
    return import.module == module ||
           (import.module.size() > module.size() && import.module.starts_with(module) &&
            import.module[module.size()] == '.');
  }
  if (import.module != module) return false;
  // A dotted name reaches attributes of the named object.
  return import.name == *name ||
         (import.name.size() > name->size() && import.name.starts_with(*name) &&
          import.name[name->size()] == '.');
}

ImportPolicy ImportPolicy::defaults() {
  ImportPolicy p;
  for (const char* text : {"os.*", "posix.*", "nt.*", "subprocess.*", "builtins.eval",
                           "builtins.exec", "builtins.compile", "builtins.__import__", "sys.*",
                           "socket.*", "shutil.*", "runpy.*", "importlib.*", "pty.*",
                           "webbrowser.*"}) {
    p.deny.push_back(ImportPattern::parse(text));
  }
  for (const char* text : {"builtins.getattr", "functools.partial"}) {
    p.dual_use.push_back(ImportPattern::parse(text));
  }
  return p;
}

void ImportPolicy::validate() const {
  for (const auto& pair : allow) {
    for (const auto& d : deny) {
      if (d.name && d.module == pair.module && *d.name == pair.name) {
        throw Error(ErrorCode::kPolicyConflict,
                    pair.module + "." + pair.name + " is both allowed and denied");
      }
    }
  }
}

ImportPolicy policy_from_json(std::string_view text) {
  using Json = nlohmann::json;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("policy is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParse, "policy must be a JSON object");
  ImportPolicy p;
  try {
    if (j.value("extend_defaults", true)) p = ImportPolicy::defaults();
    for (const auto& s : j.value("deny", Json::array())) {
      p.deny.push_back(ImportPattern::parse(s.get<std::string>()));
    }
    for (const auto& s : j.value("dual_use", Json::array())) {
      p.dual_use.push_back(ImportPattern::parse(s.get<std::string>()));
    }
    for (const auto& s : j.value("allow", Json::array())) {
      auto pattern = ImportPattern::parse(s.get<std::string>());
      if (!pattern.name) {
        throw Error(ErrorCode::kInvalidArgument, "allow entries must name one import");
      }
      p.allow.push_back({pattern.module, *pattern.name});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad policy: ") + e.what());
  }
  p.validate();
  return p;
}

ImportPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return policy_from_json(buffer.str());
}

ImportPair normalize_import(const ImportPair& import) {
  if (import.module == "__builtin__" || import.module == "exceptions") {
    return {"builtins", import.name};
  }
  if (import.module == "copy_reg") return {"copyreg", import.name};
  return import;
}

Verdict rule_scan(std::span<const ImportPair> imports, const ImportPolicy& policy) {
  Verdict verdict = Verdict::kBenign;
  for (const auto& raw : imports) {
    ImportPair import = normalize_import(raw);
    bool allowed = std::find(policy.allow.begin(), policy.allow.end(), import) != policy.allow.end();
    if (allowed) continue;
    auto hit = [&](const ImportPattern& p) { return p.matches(import); };
    if (std::any_of(policy.deny.begin(), policy.deny.end(), hit)) return Verdict::kMalicious;
    bool unresolved = import.module == "?" && import.name == "?";
    if (unresolved || std::any_of(policy.dual_use.begin(), policy.dual_use.end(), hit)) {
      verdict = Verdict::kSuspicious;
    }
  }
  return verdict;
}

}  // namespace pickle_sentry
