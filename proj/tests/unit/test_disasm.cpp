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

#include <random>
#include <string>

#include "disasm_oracle.hpp"
#include "pickle_sentry/disasm.hpp"
#include "pickle_sentry/error.hpp"

namespace ps = pickle_sentry;
using namespace std::string_literals;

namespace {

std::vector<std::string> mnemonics(const ps::Disassembly& d) {
  std::vector<std::string> out;
  for (const auto& e : d.events) out.emplace_back(e.descriptor().mnemonic);
  return out;
}

}  // namespace

TEST(Disasm, GoldenReferenceCases) {
  auto cases = ps::testing::load_oracle(PS_GOLDEN_ORACLE);
  ASSERT_GT(cases.size(), 200u);
  for (const auto& c : cases) {
    auto diff = ps::testing::compare_with_oracle(c);
    EXPECT_FALSE(diff.has_value()) << *diff;
  }
}

TEST(Disasm, NonePickle) {
  auto d = ps::disassemble("N."s);
  EXPECT_TRUE(d.well_formed);
  EXPECT_EQ(mnemonics(d), (std::vector<std::string>{"NONE", "STOP"}));
  EXPECT_EQ(d.events[1].offset, 1u);
  EXPECT_EQ(d.byte_len, 2u);
  EXPECT_EQ(d.protocol, 0);
}

TEST(Disasm, ProtocolIsHighestProto) {
  auto d = ps::disassemble("\x80\x02\x80\x04N."s);
  EXPECT_EQ(d.protocol, 4);
}

TEST(Disasm, EmptyInputThrows) {
  try {
    ps::disassemble(std::string_view{});
    FAIL() << "no exception";
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kEmptyInput);
  }
}

TEST(Disasm, TruncatedArgument) {
  // BINUNICODE claiming 16 bytes with only 3 present.
  auto d = ps::disassemble("\x80\x04X\x10\x00\x00\x00" "abc"s);
  EXPECT_FALSE(d.well_formed);
  EXPECT_EQ(d.malform_reason, ps::MalformReason::kTruncated);
  EXPECT_EQ(d.error_offset, 2u);
  EXPECT_EQ(mnemonics(d), (std::vector<std::string>{"PROTO"}));
}

TEST(Disasm, UnknownOpcode) {
  auto d = ps::disassemble("N\xff."s);
  EXPECT_FALSE(d.well_formed);
  EXPECT_EQ(d.malform_reason, ps::MalformReason::kUnknownOpcode);
  EXPECT_EQ(d.error_offset, 1u);
  EXPECT_EQ(d.events.size(), 1u);
}

TEST(Disasm, MissingStop) {
  auto d = ps::disassemble("\x80\x02N"s);
  EXPECT_FALSE(d.well_formed);
  EXPECT_EQ(d.malform_reason, ps::MalformReason::kMissingStop);
  EXPECT_EQ(d.events.size(), 2u);
  EXPECT_EQ(d.byte_len, 3u);
}

TEST(Disasm, BadDecimalArgument) {
  auto d = ps::disassemble("Iabc\n."s);
  EXPECT_FALSE(d.well_formed);
  EXPECT_EQ(d.malform_reason, ps::MalformReason::kBadArgument);
  EXPECT_EQ(d.error_offset, 0u);
}

TEST(Disasm, IntBoolsAndLongs) {
  auto d = ps::disassemble("I01\nI00\nI-5\nL123456789012345678901234567890L\n."s);
  ASSERT_TRUE(d.well_formed);
  EXPECT_EQ(std::get<bool>(d.events[0].arg), true);
  EXPECT_EQ(std::get<bool>(d.events[1].arg), false);
  EXPECT_EQ(std::get<std::int64_t>(d.events[2].arg), -5);
  EXPECT_EQ(std::get<ps::BigInt>(d.events[3].arg).literal, "123456789012345678901234567890");
}

TEST(Disasm, Long1Encoding) {
  // LONG1 little-endian two's complement: 0xff 0x7f is 32767, 0x00 0x80 is -32768.
  auto d = ps::disassemble("\x8a\x02\xff\x7f\x8a\x02\x00\x80\x8a\x00."s);
  ASSERT_TRUE(d.well_formed);
  EXPECT_EQ(std::get<std::int64_t>(d.events[0].arg), 32767);
  EXPECT_EQ(std::get<std::int64_t>(d.events[1].arg), -32768);
  EXPECT_EQ(std::get<std::int64_t>(d.events[2].arg), 0);
}

TEST(Disasm, GlobalIsRawLines) {
  auto d = ps::disassemble("cos\nsystem\n."s);
  ASSERT_TRUE(d.well_formed);
  EXPECT_EQ(std::get<ps::ImportPair>(d.events[0].arg), (ps::ImportPair{"os", "system"}));
  EXPECT_EQ(ps::format_arg(d.events[0].arg), "'os system'");
}

TEST(Disasm, FrameLengthIsArgument) {
  auto d = ps::disassemble("\x80\x04\x95\x02\x00\x00\x00\x00\x00\x00\x00N."s);
  ASSERT_TRUE(d.well_formed);
  EXPECT_EQ(std::get<std::int64_t>(d.events[1].arg), 2);
  EXPECT_EQ(d.events[2].offset, 11u);
}

TEST(Disasm, AllSegmentsKeepsOnlyCompleteFollowers) {
  auto segs = ps::disassemble_all("N.\x80\x02K\x01.garbage"s);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[1].start_offset, 2u);
  // Offsets stay relative to the whole input.
  EXPECT_EQ(segs[1].events.front().offset, 2u);
  EXPECT_EQ(ps::total_events(segs), 5u);

  auto first_only = ps::disassemble_all("N.\x80\x02K"s);
  EXPECT_EQ(first_only.size(), 1u);
}

TEST(Disasm, MalformedFirstSegmentIsKept) {
  auto segs = ps::disassemble_all("\x80\x02N"s);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_FALSE(segs[0].well_formed);
}

TEST(Disasm, OversizedArgumentIsSkipped) {
  // BINBYTES8 declaring 2^40 bytes: truncated, never allocated.
  std::string s = "\x80\x04\x8e"s + std::string("\x00\x00\x00\x00\x00\x01\x00\x00", 8) + "x";
  auto d = ps::disassemble(s);
  EXPECT_FALSE(d.well_formed);
  EXPECT_EQ(d.malform_reason, ps::MalformReason::kTruncated);
}

// Random mutations of valid pickles: decoding never throws, offsets are
// increasing and stay inside the consumed prefix.
TEST(Disasm, MutationsAreSafe) {
  auto cases = ps::testing::load_oracle(PS_GOLDEN_ORACLE);
  std::mt19937_64 rng(11);
  std::size_t runs = 0;
  for (const auto& c : cases) {
    for (int round = 0; round < 4; ++round) {
      std::string data = c.data;
      std::uniform_int_distribution<std::size_t> pos(0, data.size() - 1);
      for (int k = 0; k < 3; ++k) data[pos(rng)] = static_cast<char>(rng() & 0xff);
      if (rng() % 2 == 0) data.resize(pos(rng) + 1);
      ps::Disassembly d;
      ASSERT_NO_THROW(d = ps::disassemble(data));
      std::uint64_t last = 0;
      for (std::size_t i = 0; i < d.events.size(); ++i) {
        if (i > 0) {
          EXPECT_GT(d.events[i].offset, last);
        }
        last = d.events[i].offset;
      }
      EXPECT_LE(d.byte_len, data.size());
      if (d.well_formed) {
        EXPECT_EQ(d.events.back().opcode, ps::Opcode::kStop);
      } else {
        EXPECT_TRUE(d.malform_reason.has_value());
        EXPECT_LE(d.error_offset, data.size());
      }
      ASSERT_NO_THROW(ps::disassemble_all(data));
      ++runs;
    }
  }
  EXPECT_GT(runs, 1000u);
}
