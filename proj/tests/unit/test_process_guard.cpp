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

// The guard itself: blocked calls fail and are counted.

#include <gtest/gtest.h>

#include <dlfcn.h>
#include <spawn.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>

#include "process_guard.h"

extern char** environ;

TEST(ProcessGuard, BlocksProcessCreation) {
  ps_guard_reset();
  EXPECT_EQ(std::system("true"), -1);
  EXPECT_EQ(fork(), -1);
  EXPECT_EQ(popen("true", "r"), nullptr);
  char arg0[] = "true";
  char* argv[] = {arg0, nullptr};
  pid_t pid = 0;
  EXPECT_NE(posix_spawnp(&pid, "true", nullptr, nullptr, argv, environ), 0);
  EXPECT_EQ(execvp("true", argv), -1);
  EXPECT_EQ(ps_guard_violations(), 5);
  EXPECT_STREQ(ps_guard_last(), "execvp");
  ps_guard_reset();
}

TEST(ProcessGuard, BlocksDynamicLoading) {
  ps_guard_reset();
  EXPECT_EQ(dlopen("libm.so.6", RTLD_NOW), nullptr);
  EXPECT_EQ(ps_guard_violations(), 1);
  ps_guard_reset();
  EXPECT_EQ(ps_guard_violations(), 0);
}
