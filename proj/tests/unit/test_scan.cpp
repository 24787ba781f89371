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

#include <bit>
#include <filesystem>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/codecs.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/scan.hpp"

namespace ps = pickle_sentry;
namespace fs = std::filesystem;
using namespace std::string_literals;

namespace {

std::shared_ptr<const ps::TrainedModel> small_forest() {
  static const auto model = [] {
    ps::LabeledCorpus corpus;
    std::uint64_t seed = 1000;
    for (int round = 0; round < 6; ++round) {
      for (const auto& r : ps::corpus::benign_recipes()) {
        corpus.push_back({ps::corpus::file_features(ps::corpus::make_sample(r, seed++)),
                          ps::Label::kBenign, r});
      }
      for (const auto& r : ps::corpus::malicious_recipes()) {
        corpus.push_back({ps::corpus::file_features(ps::corpus::make_sample(r, seed++)),
                          ps::Label::kMalicious, r});
      }
    }
    ps::ForestConfig cfg;
    cfg.n_trees = 30;
    return std::make_shared<const ps::TrainedModel>(ps::train_random_forest(corpus, cfg));
  }();
  return model;
}

void write_file(const fs::path& p, const std::string& data) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << data;
}

}  // namespace

TEST(Scan, RuleOnlyVerdicts) {
  ps::ScanOptions opts;
  auto benign = ps::scan_bytes(ps::corpus::make_sample("numpy-array", 1), "a", opts);
  EXPECT_EQ(benign.file_verdict, ps::Verdict::kBenign);
  ASSERT_EQ(benign.candidates.size(), 1u);
  EXPECT_FALSE(benign.candidates[0].ml_score.has_value());

  auto exploit = ps::scan_bytes(ps::corpus::make_sample("reduce-exec", 2), "b", opts);
  EXPECT_EQ(exploit.file_verdict, ps::Verdict::kMalicious);
  EXPECT_EQ(exploit.candidates[0].rule_verdict, ps::Verdict::kMalicious);
}

TEST(Scan, EmptyInputIsScanError) {
  auto r = ps::scan_bytes("", "empty", {});
  EXPECT_EQ(r.file_verdict, ps::Verdict::kScanError);
  EXPECT_TRUE(r.error.has_value());
}

TEST(Scan, MalformedPickleIsSuspicious) {
  auto r = ps::scan_bytes("\x80\x02]K\x01"s, "t", {});
  EXPECT_EQ(r.file_verdict, ps::Verdict::kSuspicious);
  EXPECT_FALSE(r.candidates[0].well_formed);
}

TEST(Scan, DepthLimitIsScanError) {
  std::string data = ps::corpus::make_sample("numpy-array", 3);
  for (int i = 0; i < 4; ++i) data = ps::codecs::compress(ps::codecs::Codec::kGzip, data);
  ps::ScanOptions opts;
  opts.limits.max_depth = 2;
  EXPECT_EQ(ps::scan_bytes(data, "deep", opts).file_verdict, ps::Verdict::kScanError);
}

TEST(Scan, ModelScoreIsInvariantUnderWrapping) {
  ps::ScanOptions opts;
  opts.model = small_forest();
  opts.ml_only = true;
  for (const auto& recipe : ps::corpus::malicious_recipes()) {
    auto base = ps::corpus::make_sample(recipe, 77);
    auto ref = ps::scan_bytes(base, "base", opts);
    ASSERT_EQ(ref.candidates.size(), 1u) << recipe;
    ASSERT_TRUE(ref.candidates[0].ml_score.has_value());
    for (const auto& path : ps::corpus::wrap_paths()) {
      auto wrapped = ps::corpus::wrap(path, base, "payload" + std::string(ps::corpus::sample_extension(recipe)));
      auto r = ps::scan_bytes(wrapped.first, path, opts);
      ASSERT_EQ(r.candidates.size(), 1u) << recipe << " " << path;
      EXPECT_EQ(std::bit_cast<std::uint64_t>(*r.candidates[0].ml_score),
                std::bit_cast<std::uint64_t>(*ref.candidates[0].ml_score))
          << recipe << " " << path;
    }
  }
}

TEST(Scan, MlOnlyIgnoresRules) {
  auto data = ps::corpus::make_sample("reduce-exec", 4);
  ps::ScanOptions opts;
  EXPECT_EQ(ps::scan_bytes(data, "x", opts).file_verdict, ps::Verdict::kMalicious);
  opts.ml_only = true;
  auto r = ps::scan_bytes(data, "x", opts);
  EXPECT_EQ(r.candidates[0].rule_verdict, ps::Verdict::kMalicious);
  EXPECT_NE(r.file_verdict, ps::Verdict::kMalicious);
}

TEST(Scan, FilesAndTrees) {
  auto root = fs::path(PS_TEST_TMP) / "scan_tree";
  fs::remove_all(root);
  write_file(root / "b" / "two.pkl", ps::corpus::make_sample("reduce-exec", 5));
  write_file(root / "a.pkl", ps::corpus::make_sample("vocab", 6));
  write_file(root / "c" / "empty.pkl", "");
  ps::ScanOptions opts;
  opts.jobs = 2;
  auto reports = ps::scan_tree(root, opts);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_TRUE(reports[0].path.ends_with("a.pkl"));
  EXPECT_EQ(reports[0].file_verdict, ps::Verdict::kBenign);
  EXPECT_EQ(reports[1].file_verdict, ps::Verdict::kMalicious);
  EXPECT_EQ(reports[2].file_verdict, ps::Verdict::kScanError);

  auto missing = ps::scan_file(root / "nope.pkl", opts);
  EXPECT_EQ(missing.file_verdict, ps::Verdict::kScanError);
  EXPECT_TRUE(missing.error.has_value());

  opts.max_file_bytes = 10;
  EXPECT_EQ(ps::scan_file(root / "a.pkl", opts).file_verdict, ps::Verdict::kScanError);

  auto single = ps::scan_tree(root / "a.pkl", {});
  ASSERT_EQ(single.size(), 1u);
}

TEST(Scan, JsonLineSchema) {
  ps::ScanOptions opts;
  opts.model = small_forest();
  auto data = ps::corpus::wrap("zip>zip", ps::corpus::make_sample("early-trigger", 9), "x.pkl").first;
  auto line = ps::to_json_line(ps::scan_bytes(data, "f.zip", opts));
  EXPECT_EQ(line.find('\n'), std::string::npos);
  auto j = nlohmann::ordered_json::parse(line);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"path", "candidates", "file_verdict", "elapsed_ms",
                                            "issues", "error"}));
  EXPECT_EQ(j["file_verdict"], "malicious");
  const auto& c = j["candidates"][0];
  EXPECT_EQ(c["origin_chain"].size(), 2u);
  EXPECT_EQ(c["origin_chain"][0]["kind"], "zip");
  EXPECT_TRUE(c["ml_score"].is_number());
  EXPECT_EQ(c["imports"][0].size(), 2u);
}
