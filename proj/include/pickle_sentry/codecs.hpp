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

#ifndef PICKLE_SENTRY_CODECS_HPP_
#define PICKLE_SENTRY_CODECS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace pickle_sentry::codecs {

enum class Codec {
  kGzip,
  kZlib,
  kRawDeflate,
  kBzip2,
  kLz4Frame,
  kLzmaAlone,
  kXz,
  kZipLzma,  // zip method 14: small header + raw LZMA1; decode only
};

struct DecodeResult {
  std::string data;
  // True when the stream ended cleanly.
  bool complete = false;
  // Output reached `max_output` and decoding stopped early.
  bool limit_hit = false;
  // Codec error text; `data` then holds whatever decoded before the error.
  std::string error;
};

// Streaming decode with an output cap. Never throws on malformed input.
DecodeResult decompress(Codec codec, std::span<const std::uint8_t> input,
                        std::uint64_t max_output);

inline DecodeResult decompress(Codec codec, std::string_view input,
                               std::uint64_t max_output) {
  return decompress(
      codec,
      std::span(reinterpret_cast<const std::uint8_t*>(input.data()), input.size()),
      max_output);
}

// Deterministic encoders (fixed headers, no timestamps). Throws
// ErrorCode::kInvalidArgument for kZipLzma.
std::string compress(Codec codec, std::string_view input);

std::uint32_t crc32(std::string_view data);

}  // namespace pickle_sentry::codecs

#endif  // PICKLE_SENTRY_CODECS_HPP_
