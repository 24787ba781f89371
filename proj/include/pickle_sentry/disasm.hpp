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

// Lexical pickle disassembler. Decodes opcodes and their arguments; never
// simulates the stack, never materializes objects.

#ifndef PICKLE_SENTRY_DISASM_HPP_
#define PICKLE_SENTRY_DISASM_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pickle_sentry/opcodes.hpp"

namespace pickle_sentry {

// Arguments longer than this are length-checked and skipped, not copied.
inline constexpr std::uint64_t kMaxBufferedArgument = 64ull << 20;

// Integer that does not fit in int64. `literal` is a Python int literal:
// decimal normally, hexadecimal ("0x..", "-0x..") for very long LONG1/LONG4
// payloads where decimal conversion would be quadratic.
struct BigInt {
  std::string literal;
  bool operator==(const BigInt&) const = default;
};

// Raw byte payload (BINBYTES family, BYTEARRAY8).
struct ByteString {
  std::string data;
  bool operator==(const ByteString&) const = default;
};

// Text payload as UTF-8. Lone surrogates use the 3-byte generalized
// encoding, matching Python's "surrogatepass" handler.
struct Text {
  std::string utf8;
  bool operator==(const Text&) const = default;
};

// GLOBAL / INST operand, decoded the way the unpickler reads it (raw
// lines, no escape processing).
struct ImportPair {
  std::string module;
  std::string name;
  bool operator==(const ImportPair&) const = default;
};

struct SkippedPayload {
  std::uint64_t length = 0;
  bool operator==(const SkippedPayload&) const = default;
};

using OpcodeArg = std::variant<std::monostate, bool, std::int64_t, BigInt,
                               double, ByteString, Text, ImportPair,
                               SkippedPayload>;

struct OpcodeEvent {
  std::uint64_t offset = 0;
  Opcode opcode = Opcode::kStop;
  OpcodeArg arg;

  const OpcodeDescriptor& descriptor() const noexcept {
    return pickle_sentry::descriptor(opcode);
  }
};

enum class MalformReason : std::uint8_t {
  kTruncated,
  kUnknownOpcode,
  kBadArgument,
  kMissingStop,
};

std::string_view to_string(MalformReason reason);

struct Disassembly {
  std::vector<OpcodeEvent> events;
  // Highest PROTO argument seen, 0 if none.
  int protocol = 0;
  // Offset of the first byte of this segment within the decoded input.
  std::uint64_t start_offset = 0;
  // Bytes consumed by complete events.
  std::uint64_t byte_len = 0;
  bool well_formed = false;
  std::optional<MalformReason> malform_reason;
  // Offset where decoding stopped when malformed.
  std::uint64_t error_offset = 0;
};

// Decodes a single pickle starting at the beginning of `input`. Decoding
// problems are recorded in the result; only empty input throws
// (ErrorCode::kEmptyInput).
Disassembly disassemble(std::span<const std::uint8_t> input);
Disassembly disassemble(std::string_view input);

// Decodes back-to-back pickles. A segment after a STOP is kept only when it
// decodes to a complete, well-formed pickle; anything else is trailing data.
std::vector<Disassembly> disassemble_all(std::span<const std::uint8_t> input);
std::vector<Disassembly> disassemble_all(std::string_view input);

// Opcode counts of disassemble_all(input), computed without storing events
// or copying argument payloads.
struct OpcodeHistogram {
  std::array<std::uint64_t, kVocabularySize> counts{};
  std::size_t segments = 0;
  // Whether the first segment is well formed.
  bool well_formed = false;
};

// Throws ErrorCode::kEmptyInput on empty input.
OpcodeHistogram count_opcodes(std::span<const std::uint8_t> input);
OpcodeHistogram count_opcodes(std::string_view input);

std::size_t total_events(std::span<const Disassembly> segments) noexcept;

// Display form of an argument, close to what pickletools prints.
std::string format_arg(const OpcodeArg& arg);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_DISASM_HPP_
