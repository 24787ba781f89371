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

// Serializer for the corpus object model. Opcode selection, batching and
// memoization follow the standard library pickler.

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <string>
#include <unordered_map>

#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/opcodes.hpp"
#include "pickle_sentry/pyrepr.hpp"

namespace pickle_sentry::corpus {
namespace {

constexpr std::size_t kBatchSize = 1000;

template <typename... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};

// Python 3 module names as protocol 0-2 pickles spell them.
std::string_view py2_module(std::string_view module) {
  if (module == "builtins") return "__builtin__";
  if (module == "copyreg") return "copy_reg";
  if (module == "queue") return "Queue";
  return module;
}

// UTF-8 to code points; input is assumed valid.
std::vector<std::uint32_t> code_points(std::string_view s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : c < 0xe0 ? 2 : c < 0xf0 ? 3 : 4;
    std::uint32_t cp = len == 1 ? c : len == 2 ? (c & 0x1f) : len == 3 ? (c & 0x0f) : (c & 0x07);
    for (int k = 1; k < len && i + k < s.size(); ++k) {
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3f);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

class Pickler {
 public:
  explicit Pickler(int protocol) : proto_(protocol) {
    if (protocol < 0 || protocol > 5) {
      throw Error(ErrorCode::kInvalidArgument, "protocol must be 0-5");
    }
  }

  std::string run(const ValuePtr& value) {
    save(value);
    op(Opcode::kStop);
    std::string out;
    if (proto_ >= 2) {
      out += static_cast<char>(Opcode::kProto);
      out += static_cast<char>(proto_);
    }
    if (proto_ >= 4 && body_.size() >= 4) {
      out += static_cast<char>(Opcode::kFrame);
      le(out, body_.size(), 8);
    }
    out += body_;
    return out;
  }

 private:
  void op(Opcode code) { body_ += static_cast<char>(code); }

  static void le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
  }

  void line(std::string_view text) {
    body_ += text;
    body_ += '\n';
  }

  // Temporaries must outlive pickling: the memo is keyed by address.
  const Value* keep(ValuePtr v) {
    keepalive_.push_back(std::move(v));
    return keepalive_.back().get();
  }

  ValuePtr interned(const std::string& s) {
    auto [it, fresh] = interned_.try_emplace(s);
    if (fresh) it->second = std::make_shared<const Value>(Value{Str{s}});
    return it->second;
  }

  bool fetch(const void* key) {
    auto it = memo_.find(key);
    if (it == memo_.end()) return false;
    get(it->second);
    return true;
  }

  void memoize(const void* key) {
    if (memo_.count(key) != 0) return;
    auto index = static_cast<std::uint32_t>(memo_.size());
    memo_[key] = index;
    if (proto_ >= 4) {
      op(Opcode::kMemoize);
    } else if (proto_ >= 1) {
      if (index < 256) {
        op(Opcode::kBinPut);
        body_ += static_cast<char>(index);
      } else {
        op(Opcode::kLongBinPut);
        le(body_, index, 4);
      }
    } else {
      op(Opcode::kPut);
      line(std::to_string(index));
    }
  }

  void get(std::uint32_t index) {
    if (proto_ >= 1) {
      if (index < 256) {
        op(Opcode::kBinGet);
        body_ += static_cast<char>(index);
      } else {
        op(Opcode::kLongBinGet);
        le(body_, index, 4);
      }
    } else {
      op(Opcode::kGet);
      line(std::to_string(index));
    }
  }

  void save(const ValuePtr& value) { save(value.get()); }

  void save(const Value* value) {
    std::visit(Overloaded{
                   [&](std::monostate) { op(Opcode::kNone); },
                   [&](bool b) { save_bool(b); },
                   [&](std::int64_t i) { save_int(i); },
                   [&](double d) { save_float(d); },
                   [&](const Str& s) { save_str(value, s); },
                   [&](const Bytes& b) { save_bytes(value, b); },
                   [&](const List& l) { save_list(value, l); },
                   [&](const Tuple& t) { save_tuple(value, t.items); },
                   [&](const Dict& d) { save_dict(value, d); },
                   [&](const Set& s) { save_set(value, s); },
                   [&](const Global& g) { save_global(value, g); },
                   [&](const Reduce& r) { save_reduce(value, r); },
                   [&](const NewObj& n) { save_newobj(value, n); },
                   [&](const PersistentId& p) { save_persid(p); },
               },
               value->v);
  }

  void save_bool(bool b) {
    if (proto_ >= 2) {
      op(b ? Opcode::kNewTrue : Opcode::kNewFalse);
    } else {
      op(Opcode::kInt);
      line(b ? "01" : "00");
    }
  }

  void save_int(std::int64_t v) {
    if (proto_ >= 1) {
      if (v >= 0 && v <= 0xff) {
        op(Opcode::kBinInt1);
        body_ += static_cast<char>(v);
        return;
      }
      if (v >= 0 && v <= 0xffff) {
        op(Opcode::kBinInt2);
        le(body_, static_cast<std::uint64_t>(v), 2);
        return;
      }
      if (v >= INT32_MIN && v <= INT32_MAX) {
        op(Opcode::kBinInt);
        le(body_, static_cast<std::uint64_t>(v), 4);
        return;
      }
      if (proto_ >= 2) {
        op(Opcode::kLong1);
        std::string enc = encode_long(v);
        body_ += static_cast<char>(enc.size());
        body_ += enc;
        return;
      }
    }
    if (v >= INT32_MIN && v <= INT32_MAX) {
      op(Opcode::kInt);
      line(std::to_string(v));
    } else {
      op(Opcode::kLong);
      line(std::to_string(v) + "L");
    }
  }

  // Minimal little-endian two's complement, as the standard encoder.
  static std::string encode_long(std::int64_t v) {
    if (v == 0) return {};
    std::string out;
    le(out, static_cast<std::uint64_t>(v), 8);
    auto neg = v < 0;
    while (out.size() > 1) {
      auto last = static_cast<unsigned char>(out.back());
      auto prev = static_cast<unsigned char>(out[out.size() - 2]);
      if (!neg && last == 0x00 && (prev & 0x80) == 0) {
        out.pop_back();
      } else if (neg && last == 0xff && (prev & 0x80) != 0) {
        out.pop_back();
      } else {
        break;
      }
    }
    return out;
  }

  void save_float(double d) {
    if (proto_ >= 1) {
      op(Opcode::kBinFloat);
      auto bits = std::bit_cast<std::uint64_t>(d);
      for (int i = 7; i >= 0; --i) body_ += static_cast<char>((bits >> (8 * i)) & 0xff);
      return;
    }
    op(Opcode::kFloat);
    if (std::isnan(d)) {
      line("nan");
    } else if (std::isinf(d)) {
      line(d > 0 ? "inf" : "-inf");
    } else {
      line(repr_float(d));
    }
  }

  // CPython shares one object for the empty str and for each one-character
  // latin-1 str, including ones decoded while writing bytes, so equal
  // values of that kind share a memo entry.
  const void* str_key(const Value* self, const Str& s) const {
    if (s.utf8.empty()) return &latin1_chars_[256];
    if (s.utf8.size() > 2) return self;
    const auto cps = code_points(s.utf8);
    if (cps.size() == 1 && cps[0] < 256) return &latin1_chars_[cps[0]];
    return self;
  }

  void save_str(const Value* value, const Str& s) {
    const void* self = str_key(value, s);
    if (fetch(self)) return;
    if (proto_ >= 1) {
      std::size_t n = s.utf8.size();
      if (proto_ >= 4 && n < 256) {
        op(Opcode::kShortBinUnicode);
        body_ += static_cast<char>(n);
      } else if (n <= 0xffffffffu) {
        op(Opcode::kBinUnicode);
        le(body_, n, 4);
      } else {
        op(Opcode::kBinUnicode8);
        le(body_, n, 8);
      }
      body_ += s.utf8;
    } else {
      op(Opcode::kUnicode);
      line(raw_unicode_escape(s.utf8));
    }
    memoize(self);
  }

  static std::string raw_unicode_escape(std::string_view utf8) {
    std::string out;
    char buf[16];
    for (std::uint32_t cp : code_points(utf8)) {
      if (cp == '\\' || cp == 0 || cp == '\n' || cp == '\r' || cp == 0x1a) {
        std::snprintf(buf, sizeof buf, "\\u%04x", cp);
        out += buf;
      } else if (cp < 0x100) {
        out += static_cast<char>(cp);
      } else if (cp < 0x10000) {
        std::snprintf(buf, sizeof buf, "\\u%04x", cp);
        out += buf;
      } else {
        std::snprintf(buf, sizeof buf, "\\U%08x", cp);
        out += buf;
      }
    }
    return out;
  }

  void save_bytes(const Value* self, const Bytes& b) {
    if (fetch(self)) return;
    if (proto_ < 3) {
      // bytes(), or _codecs.encode(latin-1 text, 'latin1').
      Reduce r;
      if (b.data.empty()) {
        r.callable = global_value("builtins", "bytes");
      } else {
        r.callable = global_value("_codecs", "encode");
        auto text = std::make_shared<const Value>(Value{Str{latin1_to_utf8(b.data)}});
        keep(text);
        r.args = {std::move(text), interned("latin1")};
      }
      save_reduce_body(self, r);
      return;
    }
    std::size_t n = b.data.size();
    if (n < 256) {
      op(Opcode::kShortBinBytes);
      body_ += static_cast<char>(n);
    } else if (n <= 0xffffffffu) {
      op(Opcode::kBinBytes);
      le(body_, n, 4);
    } else {
      op(Opcode::kBinBytes8);
      le(body_, n, 8);
    }
    body_ += b.data;
    memoize(self);
  }

  void save_tuple(const Value* self, const std::vector<ValuePtr>& items) {
    if (items.empty()) {
      if (proto_ >= 1) {
        op(Opcode::kEmptyTuple);
      } else {
        op(Opcode::kMark);
        op(Opcode::kTuple);
      }
      return;
    }
    if (fetch(self)) return;
    if (items.size() <= 3 && proto_ >= 2) {
      for (const auto& item : items) save(item);
      static constexpr Opcode kSmall[] = {Opcode::kTuple1, Opcode::kTuple2, Opcode::kTuple3};
      op(kSmall[items.size() - 1]);
    } else {
      op(Opcode::kMark);
      for (const auto& item : items) save(item);
      op(Opcode::kTuple);
    }
    memoize(self);
  }

  void save_list(const Value* self, const List& l) {
    if (fetch(self)) return;
    if (proto_ >= 1) {
      op(Opcode::kEmptyList);
    } else {
      op(Opcode::kMark);
      op(Opcode::kList);
    }
    memoize(self);
    batch_appends(l.items);
  }

  void batch_appends(const std::vector<ValuePtr>& items) {
    if (proto_ == 0) {
      for (const auto& item : items) {
        save(item);
        op(Opcode::kAppend);
      }
      return;
    }
    for (std::size_t start = 0; start < items.size(); start += kBatchSize) {
      std::size_t end = std::min(items.size(), start + kBatchSize);
      if (end - start == 1) {
        save(items[start]);
        op(Opcode::kAppend);
        continue;
      }
      op(Opcode::kMark);
      for (std::size_t i = start; i < end; ++i) save(items[i]);
      op(Opcode::kAppends);
    }
  }

  void save_dict(const Value* self, const Dict& d) {
    if (fetch(self)) return;
    if (proto_ >= 1) {
      op(Opcode::kEmptyDict);
    } else {
      op(Opcode::kMark);
      op(Opcode::kDict);
    }
    memoize(self);
    batch_setitems(d.items);
  }

  void batch_setitems(const std::vector<std::pair<ValuePtr, ValuePtr>>& items) {
    if (proto_ == 0) {
      for (const auto& [k, v] : items) {
        save(k);
        save(v);
        op(Opcode::kSetItem);
      }
      return;
    }
    for (std::size_t start = 0; start < items.size(); start += kBatchSize) {
      std::size_t end = std::min(items.size(), start + kBatchSize);
      if (end - start == 1) {
        save(items[start].first);
        save(items[start].second);
        op(Opcode::kSetItem);
        continue;
      }
      op(Opcode::kMark);
      for (std::size_t i = start; i < end; ++i) {
        save(items[i].first);
        save(items[i].second);
      }
      op(Opcode::kSetItems);
    }
  }

  void save_set(const Value* self, const Set& s) {
    if (fetch(self)) return;
    if (proto_ < 4) {
      Reduce r;
      r.callable = global_value("builtins", s.frozen ? "frozenset" : "set");
      r.args = {std::make_shared<const Value>(Value{List{s.items}})};
      save_reduce_body(self, r);
      return;
    }
    if (s.frozen) {
      op(Opcode::kMark);
      for (const auto& item : s.items) save(item);
      op(Opcode::kFrozenSet);
      memoize(self);
      return;
    }
    op(Opcode::kEmptySet);
    memoize(self);
    for (std::size_t start = 0; start < s.items.size(); start += kBatchSize) {
      std::size_t end = std::min(s.items.size(), start + kBatchSize);
      op(Opcode::kMark);
      for (std::size_t i = start; i < end; ++i) save(s.items[i]);
      op(Opcode::kAddItems);
    }
  }

  ValuePtr global_value(const std::string& module, const std::string& name) {
    auto key = module + "\n" + name;
    auto [it, fresh] = globals_.try_emplace(key);
    if (fresh) it->second = std::make_shared<const Value>(Value{Global{module, name}});
    return it->second;
  }

  void save_global(const Value*, const Global& g) {
    // One memo entry per (module, name), whatever object spells it.
    const Value* key = global_value(g.module, g.name).get();
    if (fetch(key)) return;
    if (proto_ >= 4) {
      save(interned(g.module));
      save(interned(g.name));
      op(Opcode::kStackGlobal);
    } else {
      std::string_view module = proto_ < 3 ? py2_module(g.module) : g.module;
      op(Opcode::kGlobal);
      line(module);
      line(g.name);
    }
    memoize(key);
  }

  void save_reduce(const Value* self, const Reduce& r) {
    if (fetch(self)) return;
    save_reduce_body(self, r);
  }

  void save_reduce_body(const void* self, const Reduce& r) {
    save(r.callable);
    save_tuple(keep(std::make_shared<const Value>(Value{Tuple{r.args}})), r.args);
    op(Opcode::kReduce);
    memoize(self);
    if (!r.list_items.empty()) batch_appends(r.list_items);
    if (!r.dict_items.empty()) batch_setitems(r.dict_items);
    if (r.state) {
      save(r.state);
      op(Opcode::kBuild);
    }
  }

  void save_newobj(const Value* self, const NewObj& n) {
    if (fetch(self)) return;
    if (proto_ >= 2) {
      save(n.cls);
      save_tuple(keep(std::make_shared<const Value>(Value{Tuple{n.args}})), n.args);
      op(Opcode::kNewObj);
      memoize(self);
    } else {
      Reduce r;
      r.callable = global_value("copyreg", "_reconstructor");
      r.args = {n.cls, global_value("builtins", "object"),
                std::make_shared<const Value>(Value{std::monostate{}})};
      save_reduce_body(self, r);
    }
    if (n.state) {
      save(n.state);
      op(Opcode::kBuild);
    }
  }

  void save_persid(const PersistentId& p) {
    const auto* text = std::get_if<Str>(&p.pid->v);
    if (proto_ == 0 && text != nullptr) {
      op(Opcode::kPersId);
      line(text->utf8);
      return;
    }
    save(p.pid);
    op(Opcode::kBinPersId);
  }

  int proto_;
  std::string body_;
  std::unordered_map<const void*, std::uint32_t> memo_;
  std::array<char, 257> latin1_chars_{};
  std::map<std::string, ValuePtr> interned_;
  std::map<std::string, ValuePtr> globals_;
  std::vector<ValuePtr> keepalive_;
};

}  // namespace

std::string dumps(const ValuePtr& value, int protocol) { return Pickler(protocol).run(value); }

}  // namespace pickle_sentry::corpus
