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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/decompiler.hpp"
#include "pickle_sentry/policy.hpp"

namespace ps = pickle_sentry;
namespace pc = pickle_sentry::corpus;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<ps::Disassembly> segments_of(const std::string& sample) {
  std::vector<ps::Disassembly> out;
  for (const auto& c : ps::unwrap(sample).candidates) {
    for (auto& d : ps::disassemble_all(*c.bytes)) out.push_back(std::move(d));
  }
  return out;
}

pc::GenSpec small_spec(std::uint64_t seed) {
  auto spec = pc::GenSpec::defaults();
  spec.seed = seed;
  spec.n_benign = 24;
  spec.n_malicious = 10;
  return spec;
}

}  // namespace

TEST(Recipes, Deterministic) {
  for (const auto& list : {pc::benign_recipes(), pc::malicious_recipes()}) {
    for (const auto& r : list) {
      EXPECT_EQ(pc::make_sample(r, 5), pc::make_sample(r, 5)) << r;
      EXPECT_NE(pc::make_sample(r, 5), pc::make_sample(r, 6)) << r;
    }
  }
  EXPECT_THROW(pc::make_sample("no-such-recipe", 1), ps::Error);
}

TEST(Recipes, ExploitsCarryAnExecutingCall) {
  for (const auto& r : pc::malicious_recipes()) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      auto segs = segments_of(pc::make_sample(r, seed));
      ASSERT_FALSE(segs.empty()) << r;
      bool capable = false;
      for (const auto& d : segs) {
        for (const auto& e : d.events) capable |= ps::is_code_execution_capable(e.opcode);
      }
      EXPECT_TRUE(capable) << r << " seed " << seed;
      auto imports = ps::extract_imports(segs);
      EXPECT_EQ(ps::rule_scan(imports, ps::ImportPolicy::defaults()), ps::Verdict::kMalicious)
          << r << " seed " << seed;
    }
  }
}

TEST(Recipes, BenignImportsAreNotDenied) {
  for (const auto& r : pc::benign_recipes()) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      auto imports = ps::extract_imports(segments_of(pc::make_sample(r, seed)));
      EXPECT_EQ(ps::rule_scan(imports, ps::ImportPolicy::defaults()), ps::Verdict::kBenign)
          << r << " seed " << seed;
    }
  }
}

TEST(Recipes, WellFormedExceptTruncated) {
  for (const auto& list : {pc::benign_recipes(), pc::malicious_recipes()}) {
    for (const auto& r : list) {
      for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto segs = segments_of(pc::make_sample(r, seed));
        bool ok = std::all_of(segs.begin(), segs.end(), [](const auto& d) { return d.well_formed; });
        EXPECT_EQ(ok, r != "truncated-tail") << r << " seed " << seed;
      }
    }
  }
}

TEST(Recipes, ExploitCommandsAreInert) {
  for (const auto& r : pc::malicious_recipes()) {
    auto segs = segments_of(pc::make_sample(r, 3));
    std::string text;
    for (const auto& d : segs) {
      for (const auto& e : d.events) {
        if (const auto* t = std::get_if<ps::Text>(&e.arg)) text += t->utf8 + "\n";
      }
    }
    EXPECT_NE(text.find("pickle-sentry-"), std::string::npos) << r;
  }
}

TEST(GenSpec, Validation) {
  EXPECT_NO_THROW(pc::GenSpec::defaults().validate());
  auto spec = pc::GenSpec::defaults();
  spec.benign_mix.push_back({"reduce-exec", 1.0});
  EXPECT_THROW(spec.validate(), ps::Error);
  spec = pc::GenSpec::defaults();
  spec.wrap_paths = {"rar"};
  EXPECT_THROW(spec.validate(), ps::Error);
  spec = pc::GenSpec::defaults();
  spec.n_benign = 1;
  spec.n_malicious = 0;
  EXPECT_THROW(spec.validate(), ps::Error);
}

TEST(GenSpec, FromJson) {
  auto spec = pc::GenSpec::from_json(
      R"({"seed": 4, "n_benign": 10, "wrap_paths": ["gz", "tar"],
          "benign_mix": {"vocab": 2, "numpy-array": 1}})");
  EXPECT_EQ(spec.seed, 4u);
  EXPECT_EQ(spec.n_benign, 10u);
  EXPECT_EQ(spec.n_malicious, pc::GenSpec::defaults().n_malicious);
  EXPECT_EQ(spec.wrap_paths, (std::vector<std::string>{"gz", "tar"}));
  EXPECT_EQ(spec.benign_mix.size(), 2u);
  EXPECT_EQ(pc::GenSpec::from_json(R"({"wrap_paths": "all"})").wrap_paths, pc::wrap_paths());
  EXPECT_THROW(pc::GenSpec::from_json("[]"), ps::Error);
  EXPECT_THROW(pc::GenSpec::from_json(R"({"n_benign": "x"})"), ps::Error);
}

TEST(Generate, LayoutAndDeterminism) {
  auto root = fs::path(PS_TEST_TMP) / "corpus";
  fs::remove_all(root);
  auto rows = pc::generate(small_spec(8), root / "a");
  pc::generate(small_spec(8), root / "b");
  ASSERT_EQ(rows.size(), 24u + 10u + 10u * 10u);
  std::map<std::string, std::size_t> per_chain;
  for (const auto& r : rows) {
    ++per_chain[r.wrap_chain];
    EXPECT_EQ(slurp(root / "a" / r.path), slurp(root / "b" / r.path)) << r.path;
    if (r.wrap_chain != "none") {
      EXPECT_EQ(r.label, ps::Label::kMalicious);
    }
  }
  EXPECT_EQ(per_chain["none"], 34u);
  for (const auto& p : pc::wrap_paths()) EXPECT_EQ(per_chain[p], 10u) << p;

  auto back = pc::read_manifest(root / "a" / "manifest.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].path, rows[i].path);
    EXPECT_EQ(back[i].label, rows[i].label);
    EXPECT_EQ(back[i].recipe, rows[i].recipe);
    EXPECT_EQ(back[i].wrap_chain, rows[i].wrap_chain);
  }
}

TEST(Generate, MixIsApportioned) {
  auto spec = small_spec(2);
  spec.n_benign = 10;
  spec.benign_mix = {{"vocab", 4.0}, {"numpy-array", 1.0}};
  spec.wrap_paths.clear();
  auto root = fs::path(PS_TEST_TMP) / "mix";
  fs::remove_all(root);
  std::map<std::string, int> counts;
  for (const auto& r : pc::generate(spec, root)) {
    if (r.label == ps::Label::kBenign) ++counts[r.recipe];
  }
  EXPECT_EQ(counts["vocab"], 8);
  EXPECT_EQ(counts["numpy-array"], 2);
}

TEST(LoadCorpus, BaseAndWrapped) {
  auto root = fs::path(PS_TEST_TMP) / "load";
  fs::remove_all(root);
  pc::generate(small_spec(9), root);
  auto base = pc::load_corpus(root / "manifest.csv");
  EXPECT_EQ(base.size(), 34u);
  pc::CorpusLoadOptions opts;
  opts.include_wrapped = true;
  auto all = pc::load_corpus(root / "manifest.csv", opts);
  EXPECT_EQ(all.size(), 134u);
  EXPECT_THROW(pc::load_corpus(root / "missing.csv"), ps::Error);
}
