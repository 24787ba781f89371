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

// Minimal zip and tar readers/writers. Readers are tolerant: a damaged
// entry is reported and the rest of the archive is still listed.

#ifndef PICKLE_SENTRY_ARCHIVE_HPP_
#define PICKLE_SENTRY_ARCHIVE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pickle_sentry/codecs.hpp"

namespace pickle_sentry::archive {

struct ZipEntry {
  std::string name;
  std::uint16_t flags = 0;
  std::uint16_t method = 0;
  std::uint32_t crc = 0;
  std::uint64_t compressed_size = 0;
  std::uint64_t uncompressed_size = 0;
  // Offset of the entry's data (past the local header).
  std::uint64_t data_offset = 0;
  bool is_directory() const { return !name.empty() && name.back() == '/'; }
  bool is_encrypted() const { return (flags & 1u) != 0; }
};

struct ZipListing {
  std::vector<ZipEntry> entries;
  // Problems found while listing (missing central directory, bad headers).
  std::vector<std::string> warnings;
};

// Lists entries via the central directory (zip64 aware). Falls back to a
// forward scan of local headers when no usable central directory exists.
ZipListing list_zip(std::span<const std::uint8_t> archive);

// Decompresses one entry. Supports stored, deflate, bzip2 and lzma.
codecs::DecodeResult read_zip_entry(std::span<const std::uint8_t> archive,
                                    const ZipEntry& entry,
                                    std::uint64_t max_output);

class ZipWriter {
 public:
  void add(std::string_view name, std::string_view data, bool deflate = true);
  std::string finish();

 private:
  struct Record {
    std::string name;
    std::uint16_t method;
    std::uint32_t crc;
    std::uint32_t compressed_size;
    std::uint32_t uncompressed_size;
    std::uint32_t offset;
  };
  std::string out_;
  std::vector<Record> records_;
};

struct TarEntry {
  std::string name;
  std::uint64_t data_offset = 0;
  std::uint64_t size = 0;
  // Payload runs past the end of the archive.
  bool truncated = false;
};

struct TarListing {
  std::vector<TarEntry> entries;
  std::vector<std::string> warnings;
};

// Regular-file entries of a ustar/pax/GNU archive.
TarListing list_tar(std::span<const std::uint8_t> archive);

class TarWriter {
 public:
  void add(std::string_view name, std::string_view data);
  std::string finish();

 private:
  std::string out_;
};

}  // namespace pickle_sentry::archive

#endif  // PICKLE_SENTRY_ARCHIVE_HPP_
