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

#ifndef PICKLE_SENTRY_TESTS_PROCESS_GUARD_H_
#define PICKLE_SENTRY_TESTS_PROCESS_GUARD_H_

#ifdef __cplusplus
extern "C" {
#endif

/* Blocked process-creation and code-loading calls since start or reset. */
int ps_guard_violations(void);
/* Name of the most recent blocked call, "" if none. */
const char* ps_guard_last(void);
void ps_guard_reset(void);

#ifdef __cplusplus
}
#endif

#endif /* PICKLE_SENTRY_TESTS_PROCESS_GUARD_H_ */
