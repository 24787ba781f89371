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

// The fixed pickle opcode vocabulary (protocols 0 through 5).

#ifndef PICKLE_SENTRY_OPCODES_HPP_
#define PICKLE_SENTRY_OPCODES_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace pickle_sentry {

inline constexpr std::size_t kVocabularySize = 68;

// How the bytes following an opcode are decoded.
enum class ArgCodec : std::uint8_t {
  kNone,
  kDecimalIntNewline,   // INT, GET, PUT: "123\n", "00"/"01" are bools for INT
  kDecimalLongNewline,  // LONG: "123L\n"
  kFloatNewline,        // FLOAT: repr() text
  kQuotedStringNewline, // STRING: quoted, backslash-escaped
  kRawLine,             // PERSID: raw ASCII line
  kRawLinePair,         // GLOBAL, INST: "module\nname\n"
  kUnicodeNewline,      // UNICODE: raw-unicode-escape line
  kUint1,
  kUint2,
  kUint4,
  kUint8,
  kInt4,
  kFloat8BigEndian,
  kString1,  // SHORT_BINSTRING: uint1 length, latin-1 payload
  kString4,  // BINSTRING: int4 length, latin-1 payload
  kBytes1,
  kBytes4,
  kBytes8,
  kUnicode1,
  kUnicode4,
  kUnicode8,
  kBytearray8,
  kLong1,
  kLong4,
};

std::string_view to_string(ArgCodec codec);

enum class Opcode : std::uint8_t {
  kMark = 0x28,
  kEmptyTuple = 0x29,
  kStop = 0x2e,
  kPop = 0x30,
  kPopMark = 0x31,
  kDup = 0x32,
  kBinBytes = 0x42,
  kShortBinBytes = 0x43,
  kFloat = 0x46,
  kBinFloat = 0x47,
  kInt = 0x49,
  kBinInt = 0x4a,
  kBinInt1 = 0x4b,
  kLong = 0x4c,
  kBinInt2 = 0x4d,
  kNone = 0x4e,
  kPersId = 0x50,
  kBinPersId = 0x51,
  kReduce = 0x52,
  kString = 0x53,
  kBinString = 0x54,
  kShortBinString = 0x55,
  kUnicode = 0x56,
  kBinUnicode = 0x58,
  kEmptyList = 0x5d,
  kAppend = 0x61,
  kBuild = 0x62,
  kGlobal = 0x63,
  kDict = 0x64,
  kAppends = 0x65,
  kGet = 0x67,
  kBinGet = 0x68,
  kInst = 0x69,
  kLongBinGet = 0x6a,
  kList = 0x6c,
  kObj = 0x6f,
  kPut = 0x70,
  kBinPut = 0x71,
  kLongBinPut = 0x72,
  kSetItem = 0x73,
  kTuple = 0x74,
  kSetItems = 0x75,
  kEmptyDict = 0x7d,
  kProto = 0x80,
  kNewObj = 0x81,
  kExt1 = 0x82,
  kExt2 = 0x83,
  kExt4 = 0x84,
  kTuple1 = 0x85,
  kTuple2 = 0x86,
  kTuple3 = 0x87,
  kNewTrue = 0x88,
  kNewFalse = 0x89,
  kLong1 = 0x8a,
  kLong4 = 0x8b,
  kShortBinUnicode = 0x8c,
  kBinUnicode8 = 0x8d,
  kBinBytes8 = 0x8e,
  kEmptySet = 0x8f,
  kAddItems = 0x90,
  kFrozenSet = 0x91,
  kNewObjEx = 0x92,
  kStackGlobal = 0x93,
  kMemoize = 0x94,
  kFrame = 0x95,
  kBytearray8 = 0x96,
  kNextBuffer = 0x97,
  kReadonlyBuffer = 0x98,
};

struct OpcodeDescriptor {
  Opcode code;
  std::string_view mnemonic;
  ArgCodec arg_codec;
  int protocol_introduced;

  constexpr std::uint8_t byte() const noexcept { return static_cast<std::uint8_t>(code); }
};

// The 68-entry table, sorted by code point. A descriptor's index in this
// span is its feature-vector dimension.
std::span<const OpcodeDescriptor, kVocabularySize> opcode_vocabulary() noexcept;

// Vocabulary index for a raw byte, or nullopt if the byte is not an opcode.
std::optional<std::size_t> vocabulary_index(std::uint8_t byte) noexcept;

inline std::size_t vocabulary_index(Opcode op) noexcept {
  return *vocabulary_index(static_cast<std::uint8_t>(op));
}

const OpcodeDescriptor& descriptor(Opcode op) noexcept;

std::optional<Opcode> find_mnemonic(std::string_view mnemonic) noexcept;

// FNV-1a digest of the table contents, as 16 lowercase hex digits. Stored
// in model files so a model is never applied under a different vocabulary.
const std::string& vocabulary_fingerprint();

// GLOBAL, INST, NEWOBJ, NEWOBJ_EX, OBJ and REDUCE: the opcodes able to
// import or invoke arbitrary callables.
bool is_code_execution_capable(Opcode op) noexcept;

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_OPCODES_HPP_
