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

// Python literal rendering. Output always evaluates back to the same value.

#ifndef PICKLE_SENTRY_PYREPR_HPP_
#define PICKLE_SENTRY_PYREPR_HPP_

#include <cstdint>
#include <string>
#include <string_view>

namespace pickle_sentry {

// Appends `cp` in UTF-8; surrogates get the 3-byte form.
void append_utf8(std::string& out, std::uint32_t cp);

// Latin-1 bytes to UTF-8.
std::string latin1_to_utf8(std::string_view bytes);

std::string repr_text(std::string_view utf8);
std::string repr_bytes(std::string_view bytes);
// Shortest round-trip form; non-finite values become float('inf') etc.
std::string repr_float(double value);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_PYREPR_HPP_
