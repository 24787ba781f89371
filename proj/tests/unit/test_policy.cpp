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

#include <vector>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/policy.hpp"

namespace ps = pickle_sentry;

namespace {

ps::Verdict scan(std::vector<ps::ImportPair> imports,
                 const ps::ImportPolicy& policy = ps::ImportPolicy::defaults()) {
  return ps::rule_scan(imports, policy);
}

}  // namespace

TEST(ImportPattern, Parse) {
  EXPECT_EQ(ps::ImportPattern::parse("os.*"), (ps::ImportPattern{"os", std::nullopt}));
  EXPECT_EQ(ps::ImportPattern::parse("builtins.eval"), (ps::ImportPattern{"builtins", "eval"}));
  EXPECT_EQ(ps::ImportPattern::parse("a.b:c.d"), (ps::ImportPattern{"a.b", "c.d"}));
  EXPECT_EQ(ps::ImportPattern::parse("a.b.c"), (ps::ImportPattern{"a.b", "c"}));
  EXPECT_EQ(ps::ImportPattern::parse("os.*").str(), "os.*");
  for (const char* bad : {"", ".*", "os", ".x", "x."}) {
    EXPECT_THROW(ps::ImportPattern::parse(bad), ps::Error) << bad;
  }
}

TEST(ImportPattern, Matching) {
  auto os = ps::ImportPattern::parse("os.*");
  EXPECT_TRUE(os.matches({"os", "system"}));
  EXPECT_TRUE(os.matches({"os.path", "join"}));
  EXPECT_FALSE(os.matches({"osx", "system"}));
  auto ev = ps::ImportPattern::parse("builtins.eval");
  EXPECT_TRUE(ev.matches({"builtins", "eval"}));
  EXPECT_TRUE(ev.matches({"builtins", "eval.__call__"}));
  EXPECT_FALSE(ev.matches({"builtins", "evaluate"}));
  EXPECT_FALSE(ev.matches({"builtins", "len"}));
}

TEST(RuleScan, DefaultVerdicts) {
  EXPECT_EQ(scan({}), ps::Verdict::kBenign);
  EXPECT_EQ(scan({{"collections", "OrderedDict"}, {"numpy.core.multiarray", "_reconstruct"}}),
            ps::Verdict::kBenign);
  EXPECT_EQ(scan({{"posix", "system"}}), ps::Verdict::kMalicious);
  EXPECT_EQ(scan({{"__builtin__", "exec"}}), ps::Verdict::kMalicious);
  EXPECT_EQ(scan({{"subprocess", "Popen"}}), ps::Verdict::kMalicious);
  EXPECT_EQ(scan({{"builtins", "getattr"}}), ps::Verdict::kSuspicious);
  EXPECT_EQ(scan({{"?", "?"}}), ps::Verdict::kSuspicious);
  EXPECT_EQ(scan({{"builtins", "getattr"}, {"os", "system"}}), ps::Verdict::kMalicious);
}

TEST(RuleScan, AllowOverridesDeny) {
  auto policy = ps::policy_from_json(R"({"allow": ["os.path.join"]})");
  EXPECT_EQ(scan({{"os.path", "join"}}, policy), ps::Verdict::kBenign);
  EXPECT_EQ(scan({{"os.path", "exists"}}, policy), ps::Verdict::kMalicious);
}

TEST(RuleScan, Normalization) {
  EXPECT_EQ(ps::normalize_import({"__builtin__", "eval"}), (ps::ImportPair{"builtins", "eval"}));
  EXPECT_EQ(ps::normalize_import({"copy_reg", "_reconstructor"}),
            (ps::ImportPair{"copyreg", "_reconstructor"}));
  EXPECT_EQ(ps::normalize_import({"numpy", "dtype"}), (ps::ImportPair{"numpy", "dtype"}));
}

TEST(PolicyJson, ExtendOrReplace) {
  auto extended = ps::policy_from_json(R"({"deny": ["pickle.*"]})");
  EXPECT_EQ(extended.deny.size(), ps::ImportPolicy::defaults().deny.size() + 1);
  auto replaced = ps::policy_from_json(R"({"deny": ["pickle.*"], "extend_defaults": false})");
  ASSERT_EQ(replaced.deny.size(), 1u);
  EXPECT_EQ(scan({{"os", "system"}}, replaced), ps::Verdict::kBenign);
  EXPECT_EQ(scan({{"pickle", "loads"}}, replaced), ps::Verdict::kMalicious);
}

TEST(PolicyJson, Errors) {
  auto code_of = [](const char* text) {
    try {
      ps::policy_from_json(text);
    } catch (const ps::Error& e) {
      return e.code();
    }
    return ps::ErrorCode::kIo;
  };
  EXPECT_EQ(code_of("[1"), ps::ErrorCode::kParse);
  EXPECT_EQ(code_of("[]"), ps::ErrorCode::kParse);
  EXPECT_EQ(code_of(R"({"deny": [3]})"), ps::ErrorCode::kParse);
  EXPECT_EQ(code_of(R"({"allow": ["os.*"]})"), ps::ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of(R"({"allow": ["builtins.eval"]})"), ps::ErrorCode::kPolicyConflict);
  EXPECT_THROW(ps::load_policy("/nonexistent/policy.json"), ps::Error);
}
