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

// Pickle to Python-like pseudo-source. The pickle machine (stack, marks,
// memo) is simulated over symbolic values; imports and calls are only
// recorded as text. Nothing is ever imported or invoked.

#ifndef PICKLE_SENTRY_DECOMPILER_HPP_
#define PICKLE_SENTRY_DECOMPILER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pickle_sentry/disasm.hpp"

namespace pickle_sentry {

enum class SymKind : std::uint8_t {
  kConst,
  kList,
  kTuple,
  kDict,
  kSet,
  kImportRef,
  kCall,
  kGetattrChain,
  kMemoRef,
  kPlaceholder,
};

std::string_view to_string(SymKind kind);

using NodeId = std::uint32_t;

struct SymNode {
  SymKind kind = SymKind::kPlaceholder;
  // kConst: the value (monostate is None).
  OpcodeArg value;
  // kConst: bytes are a bytearray. kSet: frozenset.
  bool variant_flag = false;
  // kList/kTuple/kSet: elements. kDict: key, value, key, value...
  // kCall: callee followed by positional arguments.
  std::vector<NodeId> items;
  // kImportRef / kGetattrChain.
  ImportPair import;
  // kPlaceholder: rendered text. kCall: rendered call expression.
  std::string text;
  // kMemoRef: slot and the node stored there.
  std::uint64_t memo_slot = 0;
  NodeId target = 0;
  // Name of the variable holding this value once it has been assigned.
  std::string var;
};

struct DecompileOptions {
  // Longer bytes/str constants are elided from the rendered text.
  std::size_t max_literal_bytes = 4096;
  // Nesting deeper than this renders as "...".
  std::size_t max_nesting = 256;
  // Total rendered size; the rest of the program is elided.
  std::size_t max_output_bytes = 16u << 20;
};

struct PseudoProgram {
  std::vector<std::string> import_lines;
  std::vector<std::string> statements;
  // Expression assigned to `result`.
  std::string result;
  std::vector<std::string> warnings;
  // The symbolic graph; `result_node` indexes into it.
  std::vector<SymNode> nodes;
  NodeId result_node = 0;

  // Imports, statements, `result = ...`, then warnings as comments.
  std::string text() const;
};

// Throws ErrorCode::kEmptyDisassembly when there are no events.
PseudoProgram decompile(const Disassembly& disassembly, const DecompileOptions& options = {});

// One (module, name) per GLOBAL, INST and STACK_GLOBAL in stream order,
// duplicates kept. STACK_GLOBAL operands come from the simulated stack, or
// from the two nearest preceding string pushes when the stack cannot
// supply them; ("?", "?") when neither works.
std::vector<ImportPair> extract_imports(const Disassembly& disassembly);
std::vector<ImportPair> extract_imports(std::span<const Disassembly> segments);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_DECOMPILER_HPP_
