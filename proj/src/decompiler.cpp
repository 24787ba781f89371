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

#include "pickle_sentry/decompiler.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/pyrepr.hpp"

namespace pickle_sentry {

std::string_view to_string(SymKind kind) {
  switch (kind) {
    case SymKind::kConst: return "const";
    case SymKind::kList: return "list";
    case SymKind::kTuple: return "tuple";
    case SymKind::kDict: return "dict";
    case SymKind::kSet: return "set";
    case SymKind::kImportRef: return "import_ref";
    case SymKind::kCall: return "call";
    case SymKind::kGetattrChain: return "getattr_chain";
    case SymKind::kMemoRef: return "memo_ref";
    case SymKind::kPlaceholder: return "placeholder";
  }
  return "?";
}

std::string PseudoProgram::text() const {
  std::string out;
  for (const auto& line : import_lines) out += line + "\n";
  for (const auto& line : statements) out += line + "\n";
  out += "result = " + result + "\n";
  for (const auto& w : warnings) out += "# warning: " + w + "\n";
  return out;
}

namespace {

constexpr std::size_t kMaxWarnings = 100;

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

bool is_dotted_identifier(std::string_view s) {
  std::size_t start = 0;
  while (true) {
    auto dot = s.find('.', start);
    if (!is_identifier(s.substr(start, dot - start))) return false;
    if (dot == std::string_view::npos) return true;
    start = dot + 1;
  }
}

bool is_string_push(Opcode op) {
  switch (op) {
    case Opcode::kString:
    case Opcode::kBinString:
    case Opcode::kShortBinString:
    case Opcode::kUnicode:
    case Opcode::kBinUnicode:
    case Opcode::kShortBinUnicode:
    case Opcode::kBinUnicode8:
      return true;
    default:
      return false;
  }
}

// Local names bound by `from M import N` lines.
class ImportTable {
 public:
  // Returns the expression naming module.name.
  std::string bind(const ImportPair& pair) {
    auto dot = pair.name.find('.');
    std::string head = pair.name.substr(0, dot);
    std::string rest = dot == std::string::npos ? "" : pair.name.substr(dot);
    bool plain = is_dotted_identifier(pair.module) && is_identifier(head) &&
                 (rest.empty() || is_dotted_identifier(rest.substr(1)));
    if (!plain) {
      head = pair.name;
      rest.clear();
    }
    auto key = std::make_pair(pair.module, head);
    if (auto it = bound_.find(key); it != bound_.end()) return it->second + rest;

    std::string local;
    if (!plain) {
      local = "_import_" + std::to_string(lines_.size());
      lines_.push_back(local + " = import_ref(" + repr_text(pair.module) + ", " +
                       repr_text(pair.name) + ")");
    } else {
      local = head;
      for (int n = 1; taken_.count(local) != 0; ++n) local = head + "_" + std::to_string(n);
      if (local == head) {
        lines_.push_back("from " + pair.module + " import " + head);
      } else {
        lines_.push_back("from " + pair.module + " import " + head + " as " + local);
      }
    }
    taken_.insert({local, true});
    bound_.emplace(std::move(key), local);
    return local + rest;
  }

  std::vector<std::string> take_lines() { return std::move(lines_); }

 private:
  std::map<std::pair<std::string, std::string>, std::string> bound_;
  std::map<std::string, bool> taken_;
  std::vector<std::string> lines_;
};

class Machine {
 public:
  explicit Machine(const DecompileOptions& options) : options_(options) {}

  void run(const Disassembly& d) {
    const auto& events = d.events;
    bool stopped = false;
    for (std::size_t i = 0; i < events.size() && !stopped; ++i) {
      stopped = step(events, i);
    }
    if (!stopped) {
      std::string why = d.malform_reason ? std::string(to_string(*d.malform_reason))
                                         : std::string("missing-stop");
      warn("malformed tail (" + why + " at offset " + std::to_string(d.error_offset) +
           "); result is the top of the stack");
      result_ = frame_empty_total() ? placeholder("_missing_operand") : stack_.back();
    }
  }

  PseudoProgram finish() {
    PseudoProgram p;
    // A value assigned by the last statement and never used again folds
    // into the result line.
    NodeId r = result_;
    if (!statements_.empty() && statements_.back().second == r && uses_[r] == 0) {
      auto line = std::move(statements_.back().first);
      statements_.pop_back();
      p.result = line.substr(nodes_[r].var.size() + 3);
    } else {
      p.result = render_root(r);
    }
    p.import_lines = imports_.take_lines();
    p.statements.reserve(statements_.size());
    for (auto& s : statements_) p.statements.push_back(std::move(s.first));
    p.warnings = std::move(warnings_);
    if (suppressed_ > 0) {
      p.warnings.push_back(std::to_string(suppressed_) + " further warnings suppressed");
    }
    p.nodes = std::move(nodes_);
    p.result_node = r;
    return p;
  }

  std::vector<ImportPair> take_imports() { return std::move(import_pairs_); }

 private:
  // Returns true at STOP.
  bool step(const std::vector<OpcodeEvent>& events, std::size_t index) {
    const OpcodeEvent& ev = events[index];
    switch (ev.opcode) {
      case Opcode::kProto:
      case Opcode::kFrame:
      case Opcode::kReadonlyBuffer:
        break;
      case Opcode::kStop:
        result_ = pop();
        return true;

      case Opcode::kMark:
        marks_.push_back(stack_.size());
        break;
      case Opcode::kPop:
        pop();
        break;
      case Opcode::kPopMark:
        pop_mark();
        break;
      case Opcode::kDup: {
        NodeId t = top();
        share(t);
        stack_.push_back(t);
        break;
      }

      case Opcode::kNone:
        push_const(std::monostate{});
        break;
      case Opcode::kNewTrue:
        push_const(true);
        break;
      case Opcode::kNewFalse:
        push_const(false);
        break;
      case Opcode::kBytearray8:
        push_const(ev.arg, true);
        break;
      case Opcode::kInt:
      case Opcode::kBinInt:
      case Opcode::kBinInt1:
      case Opcode::kBinInt2:
      case Opcode::kLong:
      case Opcode::kLong1:
      case Opcode::kLong4:
      case Opcode::kFloat:
      case Opcode::kBinFloat:
      case Opcode::kString:
      case Opcode::kBinString:
      case Opcode::kShortBinString:
      case Opcode::kUnicode:
      case Opcode::kBinUnicode:
      case Opcode::kShortBinUnicode:
      case Opcode::kBinUnicode8:
      case Opcode::kBinBytes:
      case Opcode::kShortBinBytes:
      case Opcode::kBinBytes8:
        push_const(ev.arg);
        break;

      case Opcode::kEmptyList:
        push_container(SymKind::kList, {});
        break;
      case Opcode::kEmptyTuple:
        push_container(SymKind::kTuple, {});
        break;
      case Opcode::kEmptyDict:
        push_container(SymKind::kDict, {});
        break;
      case Opcode::kEmptySet:
        push_container(SymKind::kSet, {});
        break;
      case Opcode::kList:
        push_container(SymKind::kList, pop_mark());
        break;
      case Opcode::kTuple:
        push_container(SymKind::kTuple, pop_mark());
        break;
      case Opcode::kFrozenSet: {
        push_container(SymKind::kSet, pop_mark());
        nodes_[stack_.back()].variant_flag = true;
        break;
      }
      case Opcode::kDict: {
        auto items = pop_mark();
        if (items.size() % 2 != 0) {
          warn("DICT with an odd number of items at offset " + std::to_string(ev.offset));
          items.pop_back();
        }
        push_container(SymKind::kDict, std::move(items));
        break;
      }
      case Opcode::kTuple1:
      case Opcode::kTuple2:
      case Opcode::kTuple3: {
        std::size_t n = ev.opcode == Opcode::kTuple1 ? 1 : ev.opcode == Opcode::kTuple2 ? 2 : 3;
        std::vector<NodeId> items(n);
        for (std::size_t k = n; k-- > 0;) items[k] = pop();
        push_container(SymKind::kTuple, std::move(items));
        break;
      }

      case Opcode::kAppend: {
        NodeId v = pop();
        mutate(top(), SymKind::kList, {v});
        break;
      }
      case Opcode::kAppends: {
        auto items = pop_mark();
        mutate(top(), SymKind::kList, std::move(items));
        break;
      }
      case Opcode::kSetItem: {
        NodeId v = pop();
        NodeId k = pop();
        mutate(top(), SymKind::kDict, {k, v});
        break;
      }
      case Opcode::kSetItems: {
        auto items = pop_mark();
        if (items.size() % 2 != 0) {
          warn("SETITEMS with an odd number of items at offset " + std::to_string(ev.offset));
          items.pop_back();
        }
        mutate(top(), SymKind::kDict, std::move(items));
        break;
      }
      case Opcode::kAddItems: {
        auto items = pop_mark();
        mutate(top(), SymKind::kSet, std::move(items));
        break;
      }

      case Opcode::kPut:
      case Opcode::kBinPut:
      case Opcode::kLongBinPut:
        if (auto slot = slot_of(ev)) store(*slot, top());
        break;
      case Opcode::kMemoize:
        store(memo_.size(), top());
        break;
      case Opcode::kGet:
      case Opcode::kBinGet:
      case Opcode::kLongBinGet: {
        auto slot = slot_of(ev);
        if (!slot) {
          stack_.push_back(placeholder("_memo[?]"));
          break;
        }
        auto it = memo_.find(*slot);
        if (it == memo_.end()) {
          warn("memo slot " + std::to_string(*slot) + " read before it was stored");
          stack_.push_back(placeholder("_memo[" + std::to_string(*slot) + "]"));
          break;
        }
        share(it->second);
        SymNode ref;
        ref.kind = SymKind::kMemoRef;
        ref.memo_slot = *slot;
        ref.target = it->second;
        stack_.push_back(add(std::move(ref)));
        break;
      }

      case Opcode::kGlobal:
        if (const auto* pair = std::get_if<ImportPair>(&ev.arg)) {
          stack_.push_back(import_ref(*pair));
        } else {
          stack_.push_back(placeholder("_bad_global"));
        }
        break;
      case Opcode::kStackGlobal: {
        NodeId name = pop();
        NodeId module = pop();
        const auto* m = text_of(module);
        const auto* n = text_of(name);
        ImportPair pair;
        if (m != nullptr && n != nullptr) {
          pair = {*m, *n};
        } else {
          pair = lexical_pair(events, index);
          warn("STACK_GLOBAL operands at offset " + std::to_string(ev.offset) +
               " are not constant strings; using " + repr_text(pair.module) + ", " +
               repr_text(pair.name));
        }
        stack_.push_back(import_ref(pair));
        break;
      }

      case Opcode::kReduce: {
        NodeId args = pop();
        NodeId callee = pop();
        prepare_operands(std::array{callee, args});
        push_call(render(callee) + "(" + render_args(args) + ")", {callee, args});
        break;
      }
      case Opcode::kNewObj: {
        NodeId args = pop();
        NodeId cls = pop();
        prepare_operands(std::array{cls, args});
        std::string c = render(cls);
        std::string a = render_args(args);
        push_call(c + ".__new__(" + c + (a.empty() ? "" : ", " + a) + ")", {cls, args});
        break;
      }
      case Opcode::kNewObjEx: {
        NodeId kwargs = pop();
        NodeId args = pop();
        NodeId cls = pop();
        prepare_operands(std::array{cls, args, kwargs});
        std::string c = render(cls);
        std::string a = render_args(args);
        std::string k = render_kwargs(kwargs);
        std::string all = c;
        for (const auto* part : {&a, &k}) {
          if (!part->empty()) all += ", " + *part;
        }
        push_call(c + ".__new__(" + all + ")", {cls, args, kwargs});
        break;
      }
      case Opcode::kObj: {
        auto items = pop_mark();
        if (items.empty()) {
          warn("OBJ without a class at offset " + std::to_string(ev.offset));
          items.push_back(placeholder("_missing_operand"));
        }
        prepare_operands(items);
        std::string expr = render(items[0]) + "(" +
                           join(std::span<const NodeId>(items).subspan(1)) + ")";
        push_call(std::move(expr), std::move(items));
        break;
      }
      case Opcode::kInst: {
        auto items = pop_mark();
        NodeId cls = placeholder("_bad_inst");
        if (const auto* pair = std::get_if<ImportPair>(&ev.arg)) cls = import_ref(*pair);
        prepare_operands(items);
        std::string expr = render(cls) + "(" + join(items) + ")";
        items.insert(items.begin(), cls);
        push_call(std::move(expr), std::move(items));
        break;
      }
      case Opcode::kBuild: {
        NodeId state = pop();
        NodeId target = top();
        hoist(target);
        std::string s = render(state);
        emit(render(target) + ".__setstate__(" + s + ")", std::nullopt);
        break;
      }

      case Opcode::kPersId: {
        std::string id = "None";
        if (const auto* t = std::get_if<Text>(&ev.arg)) id = repr_text(t->utf8);
        stack_.push_back(placeholder("persistent_load(" + id + ")"));
        break;
      }
      case Opcode::kBinPersId: {
        NodeId id = pop();
        stack_.push_back(placeholder("persistent_load(" + render(id) + ")"));
        break;
      }
      case Opcode::kExt1:
      case Opcode::kExt2:
      case Opcode::kExt4: {
        std::string code = "?";
        if (const auto* v = std::get_if<std::int64_t>(&ev.arg)) code = std::to_string(*v);
        warn("extension registry code " + code + " at offset " + std::to_string(ev.offset) +
             " cannot be resolved statically");
        stack_.push_back(placeholder("extension_ref(" + code + ")"));
        break;
      }
      case Opcode::kNextBuffer:
        warn("out-of-band buffer at offset " + std::to_string(ev.offset));
        stack_.push_back(placeholder("next_buffer()"));
        break;
    }
    return false;
  }

  NodeId add(SymNode node) {
    nodes_.push_back(std::move(node));
    uses_.push_back(0);
    memoized_.push_back(false);
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId placeholder(std::string text) {
    SymNode n;
    n.kind = SymKind::kPlaceholder;
    n.text = std::move(text);
    return add(std::move(n));
  }

  void push_const(OpcodeArg value, bool bytearray = false) {
    if (const auto* skipped = std::get_if<SkippedPayload>(&value)) {
      warn("payload of " + std::to_string(skipped->length) + " bytes was not decoded");
      stack_.push_back(placeholder("skipped_payload(" + std::to_string(skipped->length) + ")"));
      return;
    }
    SymNode n;
    n.kind = SymKind::kConst;
    n.value = std::move(value);
    n.variant_flag = bytearray;
    stack_.push_back(add(std::move(n)));
  }

  void push_container(SymKind kind, std::vector<NodeId> items) {
    SymNode n;
    n.kind = kind;
    n.items = std::move(items);
    stack_.push_back(add(std::move(n)));
  }

  NodeId import_ref(const ImportPair& pair) {
    import_pairs_.push_back(pair);
    SymNode n;
    n.kind = pair.name.find('.') == std::string::npos ? SymKind::kImportRef
                                                      : SymKind::kGetattrChain;
    n.import = pair;
    n.text = imports_.bind(pair);
    return add(std::move(n));
  }

  void prepare_operands(std::span<const NodeId> operands) {
    for (NodeId id : operands) hoist_memoized_within(id, 1);
  }

  void push_call(std::string expr, std::vector<NodeId> operands) {
    SymNode n;
    n.kind = SymKind::kCall;
    n.items = std::move(operands);
    n.text = std::move(expr);
    NodeId id = add(std::move(n));
    hoist(id);
    stack_.push_back(id);
  }

  std::size_t frame_base() const { return marks_.empty() ? 0 : marks_.back(); }
  bool frame_empty_total() const { return stack_.empty(); }

  NodeId pop() {
    if (stack_.size() <= frame_base()) {
      warn("stack underflow; operand replaced by a placeholder");
      return placeholder("_missing_operand");
    }
    NodeId v = stack_.back();
    stack_.pop_back();
    return v;
  }

  NodeId top() {
    if (stack_.size() <= frame_base()) {
      warn("stack underflow; operand replaced by a placeholder");
      stack_.push_back(placeholder("_missing_operand"));
    }
    return stack_.back();
  }

  std::vector<NodeId> pop_mark() {
    std::size_t base = 0;
    if (marks_.empty()) {
      warn("no MARK on the stack; using the whole stack");
    } else {
      base = marks_.back();
      marks_.pop_back();
    }
    std::vector<NodeId> items(stack_.begin() + static_cast<std::ptrdiff_t>(base), stack_.end());
    stack_.resize(base);
    return items;
  }

  std::optional<std::uint64_t> slot_of(const OpcodeEvent& ev) {
    if (const auto* v = std::get_if<std::int64_t>(&ev.arg); v != nullptr && *v >= 0) {
      return static_cast<std::uint64_t>(*v);
    }
    if (const auto* b = std::get_if<bool>(&ev.arg)) return *b ? 1 : 0;
    warn("unusable memo index at offset " + std::to_string(ev.offset));
    return std::nullopt;
  }

  void store(std::uint64_t slot, NodeId id) {
    memo_[slot] = id;
    memoized_[resolve(id)] = true;
  }

  NodeId resolve(NodeId id) const {
    while (nodes_[id].kind == SymKind::kMemoRef) id = nodes_[id].target;
    return id;
  }

  const std::string* text_of(NodeId id) const {
    const auto& n = nodes_[resolve(id)];
    if (n.kind != SymKind::kConst) return nullptr;
    const auto* t = std::get_if<Text>(&n.value);
    return t == nullptr ? nullptr : &t->utf8;
  }

  static ImportPair lexical_pair(const std::vector<OpcodeEvent>& events, std::size_t index) {
    std::vector<const std::string*> found;
    for (std::size_t i = index; i-- > 0 && found.size() < 2;) {
      if (!is_string_push(events[i].opcode)) continue;
      if (const auto* t = std::get_if<Text>(&events[i].arg)) found.push_back(&t->utf8);
    }
    if (found.size() < 2) return {"?", "?"};
    return {*found[1], *found[0]};
  }

  static bool is_container(SymKind kind) {
    return kind == SymKind::kList || kind == SymKind::kTuple || kind == SymKind::kDict ||
           kind == SymKind::kSet;
  }

  // A container reachable twice gets a variable so both uses name the
  // same object.
  void share(NodeId id) {
    NodeId r = resolve(id);
    if (is_container(nodes_[r].kind)) hoist(r);
  }

  static bool is_mutable_container(const SymNode& n) {
    return n.kind == SymKind::kList || n.kind == SymKind::kDict ||
           (n.kind == SymKind::kSet && !n.variant_flag);
  }

  // Memoized mutable containers inside a literal can still be mutated
  // later; giving them variables first keeps those mutations visible.
  void hoist_memoized_within(NodeId id, std::size_t depth) {
    if (depth > options_.max_nesting) return;
    NodeId r = resolve(id);
    if (!nodes_[r].var.empty()) return;
    if (nodes_[r].kind == SymKind::kCall || !is_container(nodes_[r].kind)) return;
    for (std::size_t i = 0; i < nodes_[r].items.size(); ++i) {
      hoist_memoized_within(nodes_[r].items[i], depth + 1);
    }
    if (depth > 0 && memoized_[r] && is_mutable_container(nodes_[r])) hoist(r);
  }

  void hoist(NodeId id) {
    NodeId r = resolve(id);
    if (!nodes_[r].var.empty()) return;
    if (nodes_[r].kind != SymKind::kCall) hoist_memoized_within(r, 0);
    auto& node = nodes_[r];
    std::string expr = node.kind == SymKind::kCall ? node.text : render_literal(r);
    nodes_[r].var = "_var" + std::to_string(next_var_++);
    emit(nodes_[r].var + " = " + expr, r);
  }

  void mutate(NodeId target, SymKind kind, std::vector<NodeId> items) {
    NodeId r = resolve(target);
    auto& node = nodes_[r];
    bool literal = node.kind == kind && node.var.empty() &&
                   !(kind == SymKind::kSet && node.variant_flag);
    if (literal) {
      node.items.insert(node.items.end(), items.begin(), items.end());
      return;
    }
    hoist(r);
    std::string name = render(r);
    if (kind == SymKind::kDict) {
      for (std::size_t i = 0; i + 1 < items.size(); i += 2) {
        std::string k = render(items[i]);
        emit(name + "[" + k + "] = " + render(items[i + 1]), std::nullopt);
      }
    } else if (kind == SymKind::kList && items.size() == 1) {
      emit(name + ".append(" + render(items[0]) + ")", std::nullopt);
    } else if (kind == SymKind::kList) {
      emit(name + ".extend([" + join(items) + "])", std::nullopt);
    } else {
      emit(name + ".update([" + join(items) + "])", std::nullopt);
    }
  }

  void emit(std::string line, std::optional<NodeId> assigned) {
    if (truncated_) return;
    output_bytes_ += line.size() + 1;
    if (output_bytes_ > options_.max_output_bytes) {
      truncated_ = true;
      warn("output budget exhausted; remaining statements elided");
      return;
    }
    statements_.emplace_back(std::move(line), assigned.value_or(kNoNode));
  }

  void warn(std::string message) {
    if (warnings_.size() < kMaxWarnings) {
      warnings_.push_back(std::move(message));
    } else {
      ++suppressed_;
    }
  }

  // --- rendering ---

  std::string render(NodeId id) {
    std::string out;
    render_into(out, id, 0);
    return out;
  }

  std::string render_root(NodeId id) { return render(id); }

  std::string render_literal(NodeId id) {
    std::string out;
    render_body(out, id, 0);
    return out;
  }

  std::string join(std::span<const NodeId> items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0) out += ", ";
      render_into(out, items[i], 0);
    }
    return out;
  }

  std::string render_args(NodeId args) {
    NodeId r = resolve(args);
    const auto& n = nodes_[r];
    if (n.kind == SymKind::kTuple && n.var.empty()) return join(n.items);
    return "*" + render(args);
  }

  std::string render_kwargs(NodeId kwargs) {
    const auto& n = nodes_[resolve(kwargs)];
    if (n.kind == SymKind::kDict && n.var.empty()) {
      bool named = true;
      for (std::size_t i = 0; i < n.items.size(); i += 2) {
        const auto* key = text_of(n.items[i]);
        if (key == nullptr || !is_identifier(*key)) named = false;
      }
      if (named) {
        std::string out;
        for (std::size_t i = 0; i + 1 < n.items.size(); i += 2) {
          if (i > 0) out += ", ";
          out += *text_of(n.items[i]) + "=" + render(n.items[i + 1]);
        }
        return out;
      }
    }
    return "**" + render(kwargs);
  }

  void render_into(std::string& out, NodeId id, std::size_t depth) {
    NodeId r = resolve(id);
    const auto& node = nodes_[r];
    if (!node.var.empty()) {
      ++uses_[r];
      out += node.var;
      return;
    }
    render_body(out, r, depth);
  }

  void render_body(std::string& out, NodeId r, std::size_t depth) {
    if (out.size() > options_.max_output_bytes) return;
    if (depth > options_.max_nesting) {
      if (!nesting_warned_) {
        nesting_warned_ = true;
        warn("nesting deeper than " + std::to_string(options_.max_nesting) + " elided");
      }
      out += "...";
      return;
    }
    const SymNode& node = nodes_[r];
    auto items = [&](std::string_view open, std::string_view close, bool pairs) {
      out += open;
      const auto& xs = nodes_[r].items;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (out.size() > options_.max_output_bytes) {
          out += "...";
          break;
        }
        if (i > 0) out += pairs && i % 2 == 1 ? ": " : ", ";
        render_into(out, xs[i], depth + 1);
      }
      out += close;
    };
    switch (node.kind) {
      case SymKind::kConst:
        render_const(out, node);
        return;
      case SymKind::kList:
        items("[", "]", false);
        return;
      case SymKind::kTuple:
        if (node.items.size() == 1) {
          items("(", ",)", false);
        } else {
          items("(", ")", false);
        }
        return;
      case SymKind::kDict:
        items("{", "}", true);
        return;
      case SymKind::kSet:
        if (node.items.empty()) {
          out += node.variant_flag ? "frozenset()" : "set()";
        } else if (node.variant_flag) {
          out += "frozenset(";
          items("{", "}", false);
          out += ")";
        } else {
          items("{", "}", false);
        }
        return;
      case SymKind::kImportRef:
      case SymKind::kGetattrChain:
      case SymKind::kPlaceholder:
      case SymKind::kCall:
        out += node.text;
        return;
      case SymKind::kMemoRef:
        render_into(out, node.target, depth);
        return;
    }
  }

  void render_const(std::string& out, const SymNode& node) {
    const auto& v = node.value;
    if (std::holds_alternative<std::monostate>(v)) {
      out += "None";
    } else if (const auto* b = std::get_if<bool>(&v)) {
      out += *b ? "True" : "False";
    } else if (const auto* i = std::get_if<std::int64_t>(&v)) {
      out += std::to_string(*i);
    } else if (const auto* big = std::get_if<BigInt>(&v)) {
      out += big->literal;
    } else if (const auto* d = std::get_if<double>(&v)) {
      out += repr_float(*d);
    } else if (const auto* bytes = std::get_if<ByteString>(&v)) {
      if (bytes->data.size() > options_.max_literal_bytes) {
        warn("bytes constant of " + std::to_string(bytes->data.size()) + " bytes elided");
        out += "elided_bytes(" + std::to_string(bytes->data.size()) + ")";
      } else if (node.variant_flag) {
        out += "bytearray(" + repr_bytes(bytes->data) + ")";
      } else {
        out += repr_bytes(bytes->data);
      }
    } else if (const auto* t = std::get_if<Text>(&v)) {
      if (t->utf8.size() > options_.max_literal_bytes) {
        warn("str constant of " + std::to_string(t->utf8.size()) + " bytes elided");
        out += "elided_str(" + std::to_string(t->utf8.size()) + ")";
      } else {
        out += repr_text(t->utf8);
      }
    } else {
      out += "None";
    }
  }

  static constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

  const DecompileOptions& options_;
  std::vector<SymNode> nodes_;
  std::vector<std::uint32_t> uses_;
  std::vector<bool> memoized_;
  std::vector<NodeId> stack_;
  std::vector<std::size_t> marks_;
  std::unordered_map<std::uint64_t, NodeId> memo_;
  ImportTable imports_;
  std::vector<ImportPair> import_pairs_;
  std::vector<std::pair<std::string, NodeId>> statements_;
  std::vector<std::string> warnings_;
  std::size_t suppressed_ = 0;
  std::size_t output_bytes_ = 0;
  std::size_t next_var_ = 0;
  bool truncated_ = false;
  bool nesting_warned_ = false;
  NodeId result_ = 0;
};

}  // namespace

PseudoProgram decompile(const Disassembly& disassembly, const DecompileOptions& options) {
  if (disassembly.events.empty()) {
    throw Error(ErrorCode::kEmptyDisassembly, "no opcode events to decompile");
  }
  Machine machine(options);
  machine.run(disassembly);
  return machine.finish();
}

std::vector<ImportPair> extract_imports(const Disassembly& disassembly) {
  DecompileOptions options;
  Machine machine(options);
  machine.run(disassembly);
  return machine.take_imports();
}

std::vector<ImportPair> extract_imports(std::span<const Disassembly> segments) {
  std::vector<ImportPair> out;
  for (const auto& d : segments) {
    auto part = extract_imports(d);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace pickle_sentry
