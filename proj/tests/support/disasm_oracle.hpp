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

// Reference disassemblies produced by tests/oracle/gen_disasm_oracle.py.

#ifndef PICKLE_SENTRY_TESTS_DISASM_ORACLE_HPP_
#define PICKLE_SENTRY_TESTS_DISASM_ORACLE_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pickle_sentry::testing {

struct OracleCase {
  std::string id;
  int protocol = 0;
  std::string data;
  nlohmann::json ops;
};

std::vector<OracleCase> load_oracle(const std::filesystem::path& path);

// nullopt when disassemble(data) matches the reference exactly, otherwise
// a description of the first difference.
std::optional<std::string> compare_with_oracle(const OracleCase& c);

std::string unhex(const std::string& hex);

// Decimal form of a Python int literal (decimal or [-]0x hex).
std::string to_decimal(const std::string& literal);

}  // namespace pickle_sentry::testing

#endif  // PICKLE_SENTRY_TESTS_DISASM_ORACLE_HPP_
