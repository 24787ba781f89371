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

#include <set>
#include <string>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/opcodes.hpp"

namespace ps = pickle_sentry;

TEST(Opcodes, VocabularyHasSixtyEightSortedEntries) {
  auto vocab = ps::opcode_vocabulary();
  ASSERT_EQ(vocab.size(), 68u);
  for (std::size_t i = 1; i < vocab.size(); ++i) {
    EXPECT_LT(vocab[i - 1].byte(), vocab[i].byte());
  }
}

TEST(Opcodes, IndexRoundTrip) {
  auto vocab = ps::opcode_vocabulary();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    EXPECT_EQ(ps::vocabulary_index(vocab[i].byte()), i);
    EXPECT_EQ(ps::vocabulary_index(vocab[i].code), i);
    EXPECT_EQ(ps::find_mnemonic(vocab[i].mnemonic), vocab[i].code);
    EXPECT_EQ(&ps::descriptor(vocab[i].code), &vocab[i]);
  }
  std::set<int> bytes;
  for (const auto& d : vocab) bytes.insert(d.byte());
  for (int b = 0; b < 256; ++b) {
    EXPECT_EQ(ps::vocabulary_index(static_cast<std::uint8_t>(b)).has_value(), bytes.contains(b));
  }
}

TEST(Opcodes, KnownEntries) {
  EXPECT_EQ(ps::descriptor(ps::Opcode::kStop).mnemonic, "STOP");
  EXPECT_EQ(ps::descriptor(ps::Opcode::kStackGlobal).protocol_introduced, 4);
  EXPECT_EQ(ps::descriptor(ps::Opcode::kReadonlyBuffer).protocol_introduced, 5);
  EXPECT_EQ(ps::descriptor(ps::Opcode::kGlobal).arg_codec, ps::ArgCodec::kRawLinePair);
  EXPECT_EQ(ps::descriptor(ps::Opcode::kLong4).arg_codec, ps::ArgCodec::kLong4);
  EXPECT_EQ(ps::vocabulary_index(ps::Opcode::kMark), 0u);
  EXPECT_EQ(ps::vocabulary_index(ps::Opcode::kReadonlyBuffer), 67u);
  EXPECT_FALSE(ps::find_mnemonic("NOPE").has_value());
}

TEST(Opcodes, CodeExecutionSet) {
  std::set<std::string_view> capable;
  for (const auto& d : ps::opcode_vocabulary()) {
    if (ps::is_code_execution_capable(d.code)) capable.insert(d.mnemonic);
  }
  EXPECT_EQ(capable, (std::set<std::string_view>{"GLOBAL", "INST", "NEWOBJ", "NEWOBJ_EX", "OBJ",
                                                  "REDUCE"}));
}

TEST(Opcodes, FingerprintIsStableHex) {
  const auto& fp = ps::vocabulary_fingerprint();
  ASSERT_EQ(fp.size(), 16u);
  EXPECT_EQ(fp.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(&fp, &ps::vocabulary_fingerprint());
}
