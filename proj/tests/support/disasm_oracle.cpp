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

#include "disasm_oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pickle_sentry/disasm.hpp"

namespace pickle_sentry::testing {

std::vector<OracleCase> load_oracle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open oracle file " + path.string());
  std::vector<OracleCase> cases;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    cases.push_back({j.at("id").get<std::string>(), j.at("protocol").get<int>(),
                     unhex(j.at("data").get<std::string>()), j.at("ops")});
  }
  return cases;
}

std::string unhex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw std::runtime_error("odd hex length");
  std::string out(hex.size() / 2, '\0');
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<char>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  }
  return out;
}

std::string to_decimal(const std::string& literal) {
  bool negative = !literal.empty() && literal[0] == '-';
  std::string body = literal.substr(negative ? 1 : 0);
  if (body.rfind("0x", 0) != 0) return literal;
  // Base conversion on little-endian base-1e9 limbs.
  std::vector<std::uint32_t> limbs{0};
  for (char ch : body.substr(2)) {
    std::uint64_t carry = static_cast<std::uint64_t>(std::stoi(std::string(1, ch), nullptr, 16));
    for (auto& limb : limbs) {
      std::uint64_t v = static_cast<std::uint64_t>(limb) * 16 + carry;
      limb = static_cast<std::uint32_t>(v % 1000000000);
      carry = v / 1000000000;
    }
    if (carry != 0) limbs.push_back(static_cast<std::uint32_t>(carry));
  }
  std::string out = std::to_string(limbs.back());
  for (auto it = limbs.rbegin() + 1; it != limbs.rend(); ++it) {
    std::string part = std::to_string(*it);
    out += std::string(9 - part.size(), '0') + part;
  }
  return (negative && out != "0" ? "-" : "") + out;
}

namespace {

std::string describe(const OpcodeArg& arg) {
  return std::holds_alternative<std::monostate>(arg) ? "None" : format_arg(arg);
}

bool same_arg(const nlohmann::json& want, const OpcodeArg& got) {
  if (want.is_null()) return std::holds_alternative<std::monostate>(got);
  if (want.is_boolean()) {
    return std::holds_alternative<bool>(got) && std::get<bool>(got) == want.get<bool>();
  }
  if (want.contains("i")) {
    auto text = want["i"].get<std::string>();
    if (const auto* i = std::get_if<std::int64_t>(&got)) return std::to_string(*i) == text;
    if (const auto* b = std::get_if<BigInt>(&got)) return to_decimal(b->literal) == text;
    return false;
  }
  if (want.contains("f")) {
    const auto* d = std::get_if<double>(&got);
    if (d == nullptr) return false;
    auto text = want["f"].get<std::string>();
    double expected = std::strtod(text.c_str(), nullptr);
    if (std::isnan(expected)) return std::isnan(*d);
    return std::bit_cast<std::uint64_t>(expected) == std::bit_cast<std::uint64_t>(*d);
  }
  if (want.contains("s")) {
    const auto* t = std::get_if<Text>(&got);
    return t != nullptr && t->utf8 == unhex(want["s"].get<std::string>());
  }
  if (want.contains("b")) {
    const auto* b = std::get_if<ByteString>(&got);
    return b != nullptr && b->data == unhex(want["b"].get<std::string>());
  }
  if (want.contains("g")) {
    const auto* p = std::get_if<ImportPair>(&got);
    return p != nullptr && p->module == unhex(want["g"][0].get<std::string>()) &&
           p->name == unhex(want["g"][1].get<std::string>());
  }
  return false;
}

}  // namespace

std::optional<std::string> compare_with_oracle(const OracleCase& c) {
  auto d = disassemble(c.data);
  auto where = [&](std::size_t i) {
    std::ostringstream out;
    out << c.id << " (protocol " << c.protocol << ") op " << i << ": ";
    return out.str();
  };
  if (!d.well_formed) return where(d.events.size()) + "disassembly is malformed";
  if (d.events.size() != c.ops.size()) {
    return where(std::min(d.events.size(), c.ops.size())) + "expected " +
           std::to_string(c.ops.size()) + " ops, got " + std::to_string(d.events.size());
  }
  for (std::size_t i = 0; i < d.events.size(); ++i) {
    const auto& want = c.ops[i];
    const auto& got = d.events[i];
    if (got.offset != want[0].get<std::uint64_t>()) {
      return where(i) + "offset " + std::to_string(got.offset) + " != " + want[0].dump();
    }
    if (got.descriptor().mnemonic != want[1].get<std::string>()) {
      return where(i) + std::string(got.descriptor().mnemonic) + " != " + want[1].dump();
    }
    if (!same_arg(want[2], got.arg)) {
      return where(i) + std::string(got.descriptor().mnemonic) + " arg " + describe(got.arg) +
             " != " + want[2].dump();
    }
  }
  return std::nullopt;
}

}  // namespace pickle_sentry::testing
