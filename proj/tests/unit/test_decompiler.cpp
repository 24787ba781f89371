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

#include <gtest/gtest.h>

#include <string>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/decompiler.hpp"

namespace ps = pickle_sentry;
using namespace std::string_literals;

namespace {

std::string render(const std::string& data) { return ps::decompile(ps::disassemble(data)).text(); }

std::vector<ps::ImportPair> imports(const std::string& data) {
  return ps::extract_imports(ps::disassemble(data));
}

}  // namespace

TEST(Decompiler, Constants) {
  EXPECT_EQ(render("N."s), "result = None\n");
  EXPECT_EQ(render("\x80\x02]q\x00(K\x01K\x02X\x01\x00\x00\x00" "aq\x01" "e."s), "result = [1, 2, 'a']\n");
  EXPECT_EQ(render("\x80\x05\x8f(K\x01K\x02\x90."s), "result = {1, 2}\n");
  EXPECT_EQ(render("\x80\x04\x88\x89G?\xf8\x00\x00\x00\x00\x00\x00\x87."s),
            "result = (True, False, 1.5)\n");
}

TEST(Decompiler, ReduceRendersCall) {
  auto p = ps::decompile(ps::disassemble("cos\nsystem\n(S'echo hi'\ntR."s));
  EXPECT_EQ(p.import_lines, (std::vector<std::string>{"from os import system"}));
  EXPECT_EQ(p.result, "system('echo hi')");
  EXPECT_EQ(p.nodes[p.result_node].kind, ps::SymKind::kCall);
}

TEST(Decompiler, DictAndSetItems) {
  // {'k': [None]} at protocol 2.
  EXPECT_EQ(render("\x80\x02}q\x00X\x01\x00\x00\x00kq\x01]q\x02Nas."s), "result = {'k': [None]}\n");
}

TEST(Decompiler, RecursiveListUsesVariable) {
  auto text = render("\x80\x02]q\x00(K\x01h\x00" "e."s);
  EXPECT_EQ(text, "_var0 = []\n_var0.extend([1, _var0])\nresult = _var0\n");
}

TEST(Decompiler, BuildBecomesStateUpdate) {
  auto text = render("\x80\x02" "c__main__\nC\nq\x00)\x81}X\x01\x00\x00\x00" "aK\x01sb."s);
  EXPECT_NE(text.find("from __main__ import C"), std::string::npos);
  EXPECT_NE(text.find("C.__new__(C)"), std::string::npos);
  EXPECT_NE(text.find("'a': 1"), std::string::npos);
}

TEST(Decompiler, TruncatedStreamWarns) {
  auto p = ps::decompile(ps::disassemble("\x80\x02]K\x01"s));
  EXPECT_FALSE(p.warnings.empty());
  EXPECT_NE(p.text().find("# "), std::string::npos);
}

TEST(Decompiler, EmptyThrows) {
  EXPECT_THROW(ps::decompile(ps::Disassembly{}), ps::Error);
}

TEST(Decompiler, LongLiteralsAreElided) {
  std::string s = "\x80\x04\x8e"s;
  std::uint64_t n = 10000;
  for (int i = 0; i < 8; ++i) s += static_cast<char>((n >> (8 * i)) & 0xff);
  s += std::string(n, 'x') + ".";
  ps::DecompileOptions opts;
  opts.max_literal_bytes = 100;
  auto text = ps::decompile(ps::disassemble(s), opts).text();
  EXPECT_LT(text.size(), 1000u);
}

TEST(Decompiler, DeepNestingIsBounded) {
  std::string s = "\x80\x02"s;
  for (int i = 0; i < 5000; ++i) s += "]";
  for (int i = 0; i < 4999; ++i) s += "a";
  s += ".";
  ps::DecompileOptions opts;
  opts.max_nesting = 64;
  std::string text;
  ASSERT_NO_THROW(text = ps::decompile(ps::disassemble(s), opts).text());
  EXPECT_NE(text.find("..."), std::string::npos);
}

TEST(Imports, GlobalAndInst) {
  EXPECT_EQ(imports("cos\nsystem\n(S'x'\ntR."s), (std::vector<ps::ImportPair>{{"os", "system"}}));
  EXPECT_EQ(imports("(S'x'\nios\nsystem\n."s), (std::vector<ps::ImportPair>{{"os", "system"}}));
}

TEST(Imports, StackGlobalFromStackAndMemo) {
  // Module and name pushed, memoized, then fetched again for a second import.
  auto data = "\x80\x04\x8c\x02os\x94\x8c\x06system\x94\x93h\x00h\x01\x93\x86."s;
  EXPECT_EQ(imports(data), (std::vector<ps::ImportPair>{{"os", "system"}, {"os", "system"}}));
}

TEST(Imports, StackGlobalFallbacks) {
  // The operands are not strings and no string was ever pushed.
  auto unresolved = "\x80\x04NN\x93."s;
  EXPECT_EQ(imports(unresolved), (std::vector<ps::ImportPair>{{"?", "?"}}));
  // STACK_GLOBAL with an empty stack falls back to the last two string pushes.
  auto fallback = "\x80\x04\x8c\x01" "a\x8c\x01" "b00\x93."s;
  EXPECT_EQ(imports(fallback), (std::vector<ps::ImportPair>{{"a", "b"}}));
}

TEST(Imports, AcrossSegments) {
  auto segs = ps::disassemble_all("cos\nsystem\n.cposix\nsystem\n."s);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(ps::extract_imports(segs),
            (std::vector<ps::ImportPair>{{"os", "system"}, {"posix", "system"}}));
}

TEST(Decompiler, CorpusSamplesDecompile) {
  std::uint64_t seed = 100;
  for (const auto& list : {ps::corpus::benign_recipes(), ps::corpus::malicious_recipes()}) {
    for (const auto& recipe : list) {
      auto r = ps::unwrap(ps::corpus::make_sample(recipe, seed++));
      for (const auto& c : r.candidates) {
        for (const auto& d : ps::disassemble_all(*c.bytes)) {
          EXPECT_NO_THROW(ps::decompile(d).text()) << recipe;
        }
      }
    }
  }
}
