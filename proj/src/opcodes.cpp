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

#include "pickle_sentry/opcodes.hpp"

#include <array>
#include <cstdio>

#include "pickle_sentry/error.hpp"

namespace pickle_sentry {
namespace {

using C = ArgCodec;
using O = Opcode;

constexpr std::array<OpcodeDescriptor, kVocabularySize> kTable = {{
    {O::kMark, "MARK", C::kNone, 0},
    {O::kEmptyTuple, "EMPTY_TUPLE", C::kNone, 1},
    {O::kStop, "STOP", C::kNone, 0},
    {O::kPop, "POP", C::kNone, 0},
    {O::kPopMark, "POP_MARK", C::kNone, 1},
    {O::kDup, "DUP", C::kNone, 0},
    {O::kBinBytes, "BINBYTES", C::kBytes4, 3},
    {O::kShortBinBytes, "SHORT_BINBYTES", C::kBytes1, 3},
    {O::kFloat, "FLOAT", C::kFloatNewline, 0},
    {O::kBinFloat, "BINFLOAT", C::kFloat8BigEndian, 1},
    {O::kInt, "INT", C::kDecimalIntNewline, 0},
    {O::kBinInt, "BININT", C::kInt4, 1},
    {O::kBinInt1, "BININT1", C::kUint1, 1},
    {O::kLong, "LONG", C::kDecimalLongNewline, 0},
    {O::kBinInt2, "BININT2", C::kUint2, 1},
    {O::kNone, "NONE", C::kNone, 0},
    {O::kPersId, "PERSID", C::kRawLine, 0},
    {O::kBinPersId, "BINPERSID", C::kNone, 1},
    {O::kReduce, "REDUCE", C::kNone, 0},
    {O::kString, "STRING", C::kQuotedStringNewline, 0},
    {O::kBinString, "BINSTRING", C::kString4, 1},
    {O::kShortBinString, "SHORT_BINSTRING", C::kString1, 1},
    {O::kUnicode, "UNICODE", C::kUnicodeNewline, 0},
    {O::kBinUnicode, "BINUNICODE", C::kUnicode4, 1},
    {O::kEmptyList, "EMPTY_LIST", C::kNone, 1},
    {O::kAppend, "APPEND", C::kNone, 0},
    {O::kBuild, "BUILD", C::kNone, 0},
    {O::kGlobal, "GLOBAL", C::kRawLinePair, 0},
    {O::kDict, "DICT", C::kNone, 0},
    {O::kAppends, "APPENDS", C::kNone, 1},
    {O::kGet, "GET", C::kDecimalIntNewline, 0},
    {O::kBinGet, "BINGET", C::kUint1, 1},
    {O::kInst, "INST", C::kRawLinePair, 0},
    {O::kLongBinGet, "LONG_BINGET", C::kUint4, 1},
    {O::kList, "LIST", C::kNone, 0},
    {O::kObj, "OBJ", C::kNone, 1},
    {O::kPut, "PUT", C::kDecimalIntNewline, 0},
    {O::kBinPut, "BINPUT", C::kUint1, 1},
    {O::kLongBinPut, "LONG_BINPUT", C::kUint4, 1},
    {O::kSetItem, "SETITEM", C::kNone, 0},
    {O::kTuple, "TUPLE", C::kNone, 0},
    {O::kSetItems, "SETITEMS", C::kNone, 1},
    {O::kEmptyDict, "EMPTY_DICT", C::kNone, 1},
    {O::kProto, "PROTO", C::kUint1, 2},
    {O::kNewObj, "NEWOBJ", C::kNone, 2},
    {O::kExt1, "EXT1", C::kUint1, 2},
    {O::kExt2, "EXT2", C::kUint2, 2},
    {O::kExt4, "EXT4", C::kInt4, 2},
    {O::kTuple1, "TUPLE1", C::kNone, 2},
    {O::kTuple2, "TUPLE2", C::kNone, 2},
    {O::kTuple3, "TUPLE3", C::kNone, 2},
    {O::kNewTrue, "NEWTRUE", C::kNone, 2},
    {O::kNewFalse, "NEWFALSE", C::kNone, 2},
    {O::kLong1, "LONG1", C::kLong1, 2},
    {O::kLong4, "LONG4", C::kLong4, 2},
    {O::kShortBinUnicode, "SHORT_BINUNICODE", C::kUnicode1, 4},
    {O::kBinUnicode8, "BINUNICODE8", C::kUnicode8, 4},
    {O::kBinBytes8, "BINBYTES8", C::kBytes8, 4},
    {O::kEmptySet, "EMPTY_SET", C::kNone, 4},
    {O::kAddItems, "ADDITEMS", C::kNone, 4},
    {O::kFrozenSet, "FROZENSET", C::kNone, 4},
    {O::kNewObjEx, "NEWOBJ_EX", C::kNone, 4},
    {O::kStackGlobal, "STACK_GLOBAL", C::kNone, 4},
    {O::kMemoize, "MEMOIZE", C::kNone, 4},
    {O::kFrame, "FRAME", C::kUint8, 4},
    {O::kBytearray8, "BYTEARRAY8", C::kBytearray8, 5},
    {O::kNextBuffer, "NEXT_BUFFER", C::kNone, 5},
    {O::kReadonlyBuffer, "READONLY_BUFFER", C::kNone, 5},
}};

constexpr bool table_sorted() {
  for (std::size_t i = 1; i < kTable.size(); ++i) {
    if (kTable[i - 1].byte() >= kTable[i].byte()) return false;
  }
  return true;
}
static_assert(table_sorted(), "opcode table must be strictly ascending");

constexpr std::array<std::int16_t, 256> make_index() {
  std::array<std::int16_t, 256> index{};
  for (auto& slot : index) slot = -1;
  for (std::size_t i = 0; i < kTable.size(); ++i) {
    index[kTable[i].byte()] = static_cast<std::int16_t>(i);
  }
  return index;
}

constexpr std::array<std::int16_t, 256> kIndex = make_index();

}  // namespace

std::string_view to_string(ArgCodec codec) {
  switch (codec) {
    case C::kNone: return "none";
    case C::kDecimalIntNewline: return "decimal-int-newline";
    case C::kDecimalLongNewline: return "decimal-long-newline";
    case C::kFloatNewline: return "float-ascii-newline";
    case C::kQuotedStringNewline: return "string-newline";
    case C::kRawLine: return "raw-line";
    case C::kRawLinePair: return "raw-line-pair";
    case C::kUnicodeNewline: return "unicode-newline";
    case C::kUint1: return "uint1";
    case C::kUint2: return "uint2";
    case C::kUint4: return "uint4";
    case C::kUint8: return "uint8";
    case C::kInt4: return "int4";
    case C::kFloat8BigEndian: return "float8-big-endian";
    case C::kString1: return "string1";
    case C::kString4: return "string4";
    case C::kBytes1: return "bytes1";
    case C::kBytes4: return "bytes4";
    case C::kBytes8: return "bytes8";
    case C::kUnicode1: return "unicode1";
    case C::kUnicode4: return "unicode4";
    case C::kUnicode8: return "unicode8";
    case C::kBytearray8: return "bytearray8";
    case C::kLong1: return "long1";
    case C::kLong4: return "long4";
  }
  return "unknown";
}

std::span<const OpcodeDescriptor, kVocabularySize> opcode_vocabulary() noexcept {
  return kTable;
}

std::optional<std::size_t> vocabulary_index(std::uint8_t byte) noexcept {
  const auto index = kIndex[byte];
  if (index < 0) return std::nullopt;
  return static_cast<std::size_t>(index);
}

const OpcodeDescriptor& descriptor(Opcode op) noexcept {
  return kTable[static_cast<std::size_t>(kIndex[static_cast<std::uint8_t>(op)])];
}

std::optional<Opcode> find_mnemonic(std::string_view mnemonic) noexcept {
  for (const auto& d : kTable) {
    if (d.mnemonic == mnemonic) return d.code;
  }
  return std::nullopt;
}

const std::string& vocabulary_fingerprint() {
  static const std::string fingerprint = [] {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](std::string_view bytes) {
      for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
      }
    };
    for (const auto& d : kTable) {
      const char code[2] = {static_cast<char>(d.byte()),
                            static_cast<char>(d.protocol_introduced)};
      mix(std::string_view(code, 2));
      mix(d.mnemonic);
      mix(to_string(d.arg_codec));
      mix(";");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(hash));
    return std::string(buf);
  }();
  return fingerprint;
}

bool is_code_execution_capable(Opcode op) noexcept {
  switch (op) {
    case O::kGlobal:
    case O::kInst:
    case O::kNewObj:
    case O::kNewObjEx:
    case O::kObj:
    case O::kReduce:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInputTooShort: return "InputTooShort";
    case ErrorCode::kDepthExceeded: return "DepthExceeded";
    case ErrorCode::kInflationBombSuspected: return "InflationBombSuspected";
    case ErrorCode::kLimitExceeded: return "LimitExceeded";
    case ErrorCode::kCorruptContainer: return "CorruptContainer";
    case ErrorCode::kUnsupportedContainer: return "UnsupportedContainer";
    case ErrorCode::kEmptyDisassembly: return "EmptyDisassembly";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSingleClassCorpus: return "SingleClassCorpus";
    case ErrorCode::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::kVocabularyFingerprintMismatch:
      return "VocabularyFingerprintMismatch";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kModelKindMismatch: return "ModelKindMismatch";
    case ErrorCode::kPolicyConflict: return "PolicyConflict";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace pickle_sentry
