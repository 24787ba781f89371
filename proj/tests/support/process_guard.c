/*
 * Copyright 2026 The pickle-sentry Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS-IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * Test-binary replacements for every libc entry point that starts a process
 * or loads code. Definitions in the executable take precedence over libc's,
 * so any call from the library under test lands here, is counted and fails.
 */

#define _GNU_SOURCE
#include "process_guard.h"

#include <dlfcn.h>
#include <errno.h>
#include <sched.h>
#include <spawn.h>
#include <stdarg.h>
#include <stdatomic.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

static atomic_int g_violations;
static _Atomic(const char*) g_last = "";

static void record(const char* what) {
  atomic_fetch_add(&g_violations, 1);
  atomic_store(&g_last, what);
  static const char kPrefix[] = "process_guard: blocked ";
  ssize_t ignored = write(2, kPrefix, sizeof kPrefix - 1);
  ignored = write(2, what, strlen(what));
  ignored = write(2, "\n", 1);
  (void)ignored;
}

int ps_guard_violations(void) { return atomic_load(&g_violations); }
const char* ps_guard_last(void) { return atomic_load(&g_last); }
void ps_guard_reset(void) {
  atomic_store(&g_violations, 0);
  atomic_store(&g_last, "");
}

pid_t fork(void) {
  record("fork");
  errno = EPERM;
  return -1;
}

pid_t vfork(void) {
  record("vfork");
  errno = EPERM;
  return -1;
}

int execve(const char* path, char* const argv[], char* const envp[]) {
  (void)path, (void)argv, (void)envp;
  record("execve");
  errno = EPERM;
  return -1;
}

int execv(const char* path, char* const argv[]) {
  (void)path, (void)argv;
  record("execv");
  errno = EPERM;
  return -1;
}

int execvp(const char* file, char* const argv[]) {
  (void)file, (void)argv;
  record("execvp");
  errno = EPERM;
  return -1;
}

int execvpe(const char* file, char* const argv[], char* const envp[]) {
  (void)file, (void)argv, (void)envp;
  record("execvpe");
  errno = EPERM;
  return -1;
}

int fexecve(int fd, char* const argv[], char* const envp[]) {
  (void)fd, (void)argv, (void)envp;
  record("fexecve");
  errno = EPERM;
  return -1;
}

int execl(const char* path, const char* arg, ...) {
  (void)path, (void)arg;
  record("execl");
  errno = EPERM;
  return -1;
}

int execlp(const char* file, const char* arg, ...) {
  (void)file, (void)arg;
  record("execlp");
  errno = EPERM;
  return -1;
}

int execle(const char* path, const char* arg, ...) {
  (void)path, (void)arg;
  record("execle");
  errno = EPERM;
  return -1;
}

int posix_spawn(pid_t* pid, const char* path, const posix_spawn_file_actions_t* actions,
                const posix_spawnattr_t* attr, char* const argv[], char* const envp[]) {
  (void)pid, (void)path, (void)actions, (void)attr, (void)argv, (void)envp;
  record("posix_spawn");
  return EPERM;
}

int posix_spawnp(pid_t* pid, const char* file, const posix_spawn_file_actions_t* actions,
                 const posix_spawnattr_t* attr, char* const argv[], char* const envp[]) {
  (void)pid, (void)file, (void)actions, (void)attr, (void)argv, (void)envp;
  record("posix_spawnp");
  return EPERM;
}

int clone(int (*fn)(void*), void* stack, int flags, void* arg, ...) {
  (void)fn, (void)stack, (void)flags, (void)arg;
  record("clone");
  errno = EPERM;
  return -1;
}

int system(const char* command) {
  (void)command;
  record("system");
  return -1;
}

FILE* popen(const char* command, const char* mode) {
  (void)command, (void)mode;
  record("popen");
  errno = EPERM;
  return NULL;
}

void* dlopen(const char* file, int mode) {
  (void)file, (void)mode;
  record("dlopen");
  return NULL;
}

void* dlmopen(Lmid_t lmid, const char* file, int mode) {
  (void)lmid, (void)file, (void)mode;
  record("dlmopen");
  return NULL;
}
