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

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "pickle_sentry/error.hpp"
#include "disasm_oracle.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/features.hpp"

namespace ps = pickle_sentry;
using namespace std::string_literals;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Features, NonePickleFrequencies) {
  auto v = ps::extract(ps::disassemble("N."s));
  ASSERT_EQ(v.dimension(), ps::kVocabularySize);
  EXPECT_EQ(v.total_opcodes, 2u);
  EXPECT_EQ(v.freqs[ps::vocabulary_index(ps::Opcode::kNone)], 0.5);
  EXPECT_EQ(v.freqs[ps::vocabulary_index(ps::Opcode::kStop)], 0.5);
  EXPECT_EQ(v.oov_mass, 0.0);
  EXPECT_FALSE(v.projected);
}

TEST(Features, CountsOverSegments) {
  auto segs = ps::disassemble_all("N.K\x01K\x02\x86."s);
  auto v = ps::extract(std::span<const ps::Disassembly>(segs));
  EXPECT_EQ(v.total_opcodes, 6u);
  EXPECT_DOUBLE_EQ(v.freqs[ps::vocabulary_index(ps::Opcode::kStop)], 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(v.freqs[ps::vocabulary_index(ps::Opcode::kBinInt1)], 2.0 / 6.0);
}

TEST(Features, EmptyDisassemblyThrows) {
  try {
    ps::extract(std::span<const ps::OpcodeEvent>{});
    FAIL();
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kEmptyDisassembly);
  }
}

// Frequencies are counts over the total, so they sum to one and do not
// depend on the wrapping or on argument values.
TEST(Features, SumToOneOnCorpusSamples) {
  std::uint64_t seed = 1;
  for (const auto& recipe : ps::corpus::benign_recipes()) {
    for (int i = 0; i < 3; ++i) {
      auto v = ps::corpus::file_features(ps::corpus::make_sample(recipe, seed++));
      EXPECT_NEAR(sum(v.freqs), 1.0, 1e-12) << recipe;
      for (double f : v.freqs) EXPECT_GE(f, 0.0);
    }
  }
}

TEST(Features, ProjectionDropsZeroColumns) {
  std::vector<ps::FeatureVector> corpus = {ps::extract(ps::disassemble("N."s)),
                                           ps::extract(ps::disassemble("K\x01."s))};
  auto p = ps::fit_projection(corpus);
  EXPECT_EQ(p.kept_indices,
            (std::vector<std::size_t>{ps::vocabulary_index(ps::Opcode::kStop),
                                      ps::vocabulary_index(ps::Opcode::kBinInt1),
                                      ps::vocabulary_index(ps::Opcode::kNone)}));
  EXPECT_NO_THROW(p.validate());

  auto q = ps::project(ps::extract(ps::disassemble("K\x01K\x02]."s)), p);
  EXPECT_TRUE(q.projected);
  ASSERT_EQ(q.dimension(), 3u);
  EXPECT_DOUBLE_EQ(q.freqs[0], 0.25);
  EXPECT_DOUBLE_EQ(q.freqs[1], 0.5);
  EXPECT_DOUBLE_EQ(q.freqs[2], 0.0);
  EXPECT_DOUBLE_EQ(q.oov_mass, 0.25);
  EXPECT_NEAR(sum(q.freqs) + q.oov_mass, 1.0, 1e-15);
}

TEST(Features, ProjectionErrors) {
  EXPECT_THROW(ps::fit_projection(std::span<const ps::FeatureVector>{}), ps::Error);
  ps::VocabularyProjection bad{{3, 2}};
  EXPECT_THROW(bad.validate(), ps::Error);
  ps::VocabularyProjection out_of_range{{1, 68}};
  EXPECT_THROW(out_of_range.validate(), ps::Error);
  ps::FeatureVector short_vec;
  short_vec.freqs = {1.0};
  try {
    ps::project(short_vec, ps::VocabularyProjection{{0}});
    FAIL();
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kDimensionMismatch);
  }
}

TEST(Features, CsvRoundTrip) {
  std::vector<ps::LabeledVector> rows;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 5; ++i) {
    auto v = ps::corpus::file_features(ps::corpus::make_sample("reduce-exec", rng()));
    rows.push_back({"row,\"" + std::to_string(i), v});
  }
  std::stringstream buf;
  ps::export_csv(buf, rows);
  std::string header;
  std::getline(std::istringstream(buf.str()), header);
  EXPECT_TRUE(header.starts_with("label,f_0,f_1,"));
  EXPECT_TRUE(header.ends_with(",f_67,total"));
  auto back = ps::read_csv(buf);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].label, rows[i].label);
    EXPECT_EQ(back[i].vector.total_opcodes, rows[i].vector.total_opcodes);
    for (std::size_t j = 0; j < ps::kVocabularySize; ++j) {
      EXPECT_NEAR(back[i].vector.freqs[j], rows[i].vector.freqs[j], 1e-11);
    }
  }
}

TEST(Features, CsvRejectsBadInput) {
  std::istringstream in("label,f_0\nx,0.5\n");
  EXPECT_THROW(ps::read_csv(in), ps::Error);
}

// The counting path agrees with full disassembly on valid and damaged
// streams alike.
TEST(Features, HistogramMatchesDisassembly) {
  auto cases = ps::testing::load_oracle(PS_GOLDEN_ORACLE);
  std::mt19937_64 rng(21);
  for (const auto& c : cases) {
    for (int round = 0; round < 3; ++round) {
      std::string data = c.data;
      if (round > 0) data[rng() % data.size()] = static_cast<char>(rng() & 0xff);
      if (round == 2) data += c.data + "junk";
      auto segments = ps::disassemble_all(data);
      auto h = ps::count_opcodes(data);
      EXPECT_EQ(h.segments, segments.size()) << c.id;
      EXPECT_EQ(h.well_formed, segments[0].well_formed) << c.id;
      if (ps::total_events(segments) == 0) continue;
      auto a = ps::extract(std::span<const ps::Disassembly>(segments));
      auto b = ps::extract(h);
      EXPECT_EQ(a.total_opcodes, b.total_opcodes) << c.id;
      EXPECT_EQ(a.freqs, b.freqs) << c.id;
    }
  }
  EXPECT_THROW(ps::count_opcodes(std::string_view{}), ps::Error);
}
