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

#include <array>
#include <memory>
#include <string>

#include "disasm_oracle.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/disasm.hpp"

namespace ps = pickle_sentry;
namespace pc = pickle_sentry::corpus;

namespace {

template <typename T>
pc::ValuePtr val(T v) {
  return std::make_shared<const pc::Value>(pc::Value{std::move(v)});
}
pc::ValuePtr none() { return val(std::monostate{}); }
pc::ValuePtr i64(std::int64_t v) { return val(v); }
pc::ValuePtr str(const char* s) { return val(pc::Str{s}); }

pc::ValuePtr build(const std::string& name) {
  if (name == "none") return none();
  if (name == "mixed") {
    return val(pc::List{{i64(1), str("a"), val(pc::Bytes{"xy"}), val(2.5), val(true), i64(-300),
                         i64(70000), i64(std::int64_t{1} << 40)}});
  }
  if (name == "dict") return val(pc::Dict{{{str("k"), val(pc::Tuple{{i64(1), i64(2)}})}}});
  if (name == "shared") {
    auto x = val(pc::List{});
    return val(pc::List{{x, x}});
  }
  // Decoding b"x" yields the same one-character str object as "x".
  if (name == "onechar") return val(pc::List{{str("x"), val(pc::Bytes{"x"}), val(1e16)}});
  if (name == "set") return val(pc::Set{{i64(1)}, false});
  pc::Reduce od;
  od.callable = val(pc::Global{"collections", "OrderedDict"});
  od.dict_items = {{str("a"), i64(1)}};
  return val(od);
}

struct Expected {
  const char* name;
  std::array<const char*, 6> hex;
};

// pickle.dumps output of the standard Python pickler, per protocol.
const Expected kExpected[] = {
      {"none",
      {"4e2e",
       "4e2e",
       "80024e2e",
       "80034e2e",
       "80044e2e",
       "80054e2e"}},
      {"mixed",
      {"286c70300a49310a6156610a70310a61635f636f646563730a656e636f64650a70320a285678790a70330a566c6174696e310a70340a7470350a5270360a6146322e350a614930310a61492d3330300a614937303030300a614c313039393531313632373737364c0a612e",
       "5d7100284b015801000000617101635f636f646563730a656e636f64650a71022858020000007879710358060000006c6174696e3171047471055271064740040000000000004930310a4ad4feffff4a701101004c313039393531313632373737364c0a652e",
       "80025d7100284b015801000000617101635f636f646563730a656e636f64650a710258020000007879710358060000006c6174696e317104867105527106474004000000000000884ad4feffff4a701101008a06000000000001652e",
       "80035d7100284b015801000000617101430278797102474004000000000000884ad4feffff4a701101008a06000000000001652e",
       "8004952c000000000000005d94284b018c0161944302787994474004000000000000884ad4feffff4a701101008a06000000000001652e",
       "8005952c000000000000005d94284b018c0161944302787994474004000000000000884ad4feffff4a701101008a06000000000001652e"}},
      {"dict",
      {"286470300a566b0a70310a2849310a49320a7470320a732e",
       "7d710058010000006b7101284b014b02747102732e",
       "80027d710058010000006b71014b014b02867102732e",
       "80037d710058010000006b71014b014b02867102732e",
       "8004950e000000000000007d948c016b944b014b028694732e",
       "8005950e000000000000007d948c016b944b014b028694732e"}},
      {"shared",
      {"286c70300a286c70310a6167310a612e",
       "5d7100285d71016801652e",
       "80025d7100285d71016801652e",
       "80035d7100285d71016801652e",
       "80049509000000000000005d94285d946801652e",
       "80059509000000000000005d94285d946801652e"}},
      {"set",
      {"635f5f6275696c74696e5f5f0a7365740a70300a28286c70310a49310a617470320a5270330a2e",
       "635f5f6275696c74696e5f5f0a7365740a7100285d71014b01617471025271032e",
       "8002635f5f6275696c74696e5f5f0a7365740a71005d71014b01618571025271032e",
       "8003636275696c74696e730a7365740a71005d71014b01618571025271032e",
       "80049507000000000000008f94284b01902e",
       "80059507000000000000008f94284b01902e"}},
      {"od",
      {"63636f6c6c656374696f6e730a4f726465726564446963740a70300a28745270310a56610a70320a49310a732e",
       "63636f6c6c656374696f6e730a4f726465726564446963740a71002952710158010000006171024b01732e",
       "800263636f6c6c656374696f6e730a4f726465726564446963740a71002952710158010000006171024b01732e",
       "800363636f6c6c656374696f6e730a4f726465726564446963740a71002952710158010000006171024b01732e",
       "80049529000000000000008c0b636f6c6c656374696f6e73948c0b4f726465726564446963749493942952948c0161944b01732e",
       "80059529000000000000008c0b636f6c6c656374696f6e73948c0b4f726465726564446963749493942952948c0161944b01732e"}},
      {"onechar",
      {"286c70300a56780a70310a61635f636f646563730a656e636f64650a70320a2867310a566c6174696e310a70330a7470340a5270350a614631652b31360a612e",
       "5d7100285801000000787101635f636f646563730a656e636f64650a710228680158060000006c6174696e317103747104527105474341c37937e08000652e",
       "80025d7100285801000000787101635f636f646563730a656e636f64650a7102680158060000006c6174696e317103867104527105474341c37937e08000652e",
       "80035d71002858010000007871014301787102474341c37937e08000652e",
       "80049516000000000000005d94288c01789443017894474341c37937e08000652e",
       "80059516000000000000005d94288c01789443017894474341c37937e08000652e"}},
};

}  // namespace

TEST(Pickler, MatchesStandardPickler) {
  for (const auto& e : kExpected) {
    auto value = build(e.name);
    for (int p = 0; p < 6; ++p) {
      EXPECT_EQ(pc::dumps(value, p), ps::testing::unhex(e.hex[p])) << e.name << " protocol " << p;
    }
  }
}

TEST(Pickler, OutputIsWellFormed) {
  for (const auto& e : kExpected) {
    for (int p = 0; p < 6; ++p) {
      auto d = ps::disassemble(pc::dumps(build(e.name), p));
      EXPECT_TRUE(d.well_formed) << e.name << " protocol " << p;
      EXPECT_EQ(d.protocol, p < 2 ? 0 : p);
    }
  }
}

TEST(Pickler, RejectsBadProtocol) {
  EXPECT_THROW(pc::dumps(none(), 6), ps::Error);
  EXPECT_THROW(pc::dumps(none(), -1), ps::Error);
}
