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

// GoogleTest entry point shared by the unit tests: the run fails if any
// code under test tried to spawn a process or load a shared object.

#include <gtest/gtest.h>

#include "process_guard.h"

namespace {

class ProcessGuardCheck : public ::testing::Environment {
 public:
  void TearDown() override {
    EXPECT_EQ(ps_guard_violations(), 0) << "blocked call: " << ps_guard_last();
  }
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::AddGlobalTestEnvironment(new ProcessGuardCheck);
  return RUN_ALL_TESTS();
}
