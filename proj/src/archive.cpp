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

#include "pickle_sentry/archive.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>

#include "pickle_sentry/error.hpp"

namespace pickle_sentry::archive {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint32_t kZip64LocatorSig = 0x07064b50;
constexpr std::uint32_t kZip64EndSig = 0x06064b50;
constexpr std::uint32_t kDescriptorSig = 0x08074b50;

class ByteView {
 public:
  explicit ByteView(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t size() const { return data_.size(); }

  bool has(std::uint64_t pos, std::uint64_t n) const {
    return pos <= data_.size() && n <= data_.size() - pos;
  }

  std::uint64_t le(std::uint64_t pos, int width) const {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(data_[static_cast<std::size_t>(pos) + i]) << (8 * i);
    }
    return v;
  }
  std::uint16_t u16(std::uint64_t pos) const { return static_cast<std::uint16_t>(le(pos, 2)); }
  std::uint32_t u32(std::uint64_t pos) const { return static_cast<std::uint32_t>(le(pos, 4)); }
  std::uint64_t u64(std::uint64_t pos) const { return le(pos, 8); }

  std::string str(std::uint64_t pos, std::uint64_t n) const {
    return {reinterpret_cast<const char*>(data_.data()) + pos, static_cast<std::size_t>(n)};
  }

  std::span<const std::uint8_t> sub(std::uint64_t pos, std::uint64_t n) const {
    return data_.subspan(static_cast<std::size_t>(pos), static_cast<std::size_t>(n));
  }

 private:
  std::span<const std::uint8_t> data_;
};

void put16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xff);
  out += static_cast<char>(v >> 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

// Position of the local header's data, or nullopt if the header is bad.
std::optional<std::uint64_t> local_data_offset(const ByteView& zip, std::uint64_t local) {
  if (!zip.has(local, 30) || zip.u32(local) != kLocalSig) return std::nullopt;
  const std::uint64_t data = local + 30 + zip.u16(local + 26) + zip.u16(local + 28);
  if (data > zip.size()) return std::nullopt;
  return data;
}

void apply_zip64_extra(const ByteView& zip, std::uint64_t extra, std::uint16_t extra_len,
                       ZipEntry& entry, std::uint64_t& local_offset) {
  std::uint64_t pos = extra;
  const std::uint64_t end = extra + extra_len;
  while (pos + 4 <= end) {
    const std::uint16_t id = zip.u16(pos);
    const std::uint16_t len = zip.u16(pos + 2);
    if (pos + 4 + len > end) return;
    if (id == 0x0001) {
      std::uint64_t field = pos + 4;
      const std::uint64_t field_end = field + len;
      auto take = [&](std::uint64_t& target) {
        if (target == 0xffffffffu && field + 8 <= field_end) {
          target = zip.u64(field);
          field += 8;
        }
      };
      take(entry.uncompressed_size);
      take(entry.compressed_size);
      take(local_offset);
      return;
    }
    pos += 4 + len;
  }
}

std::optional<std::uint64_t> find_end_record(const ByteView& zip) {
  if (zip.size() < 22) return std::nullopt;
  const std::uint64_t last = zip.size() - 22;
  const std::uint64_t first = last > 0xffff ? last - 0xffff : 0;
  for (std::uint64_t pos = last + 1; pos-- > first;) {
    if (zip.u32(pos) == kEndSig) return pos;
  }
  return std::nullopt;
}

bool list_central(const ByteView& zip, std::uint64_t eocd, ZipListing& listing) {
  std::uint64_t count = zip.u16(eocd + 10);
  std::uint64_t cd_size = zip.u32(eocd + 12);
  std::uint64_t cd_offset = zip.u32(eocd + 16);
  std::uint64_t cd_end_actual = eocd;

  if (eocd >= 20 && zip.u32(eocd - 20) == kZip64LocatorSig) {
    const std::uint64_t end64 = zip.u64(eocd - 20 + 8);
    // The zip64 end record sits right before the locator in practice; trust
    // the recorded offset first, then that position.
    std::uint64_t candidates[2] = {end64, eocd >= 76 ? eocd - 20 - 56 : end64};
    for (auto pos : candidates) {
      if (zip.has(pos, 56) && zip.u32(pos) == kZip64EndSig) {
        count = zip.u64(pos + 32);
        cd_size = zip.u64(pos + 40);
        cd_offset = zip.u64(pos + 48);
        cd_end_actual = pos;
        break;
      }
    }
  }
  // Data prepended to the archive shifts every recorded offset.
  std::uint64_t shift = 0;
  if (cd_offset + cd_size < cd_end_actual) shift = cd_end_actual - (cd_offset + cd_size);

  std::uint64_t pos = cd_offset + shift;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!zip.has(pos, 46) || zip.u32(pos) != kCentralSig) {
      listing.warnings.push_back("central directory entry " + std::to_string(i) +
                                 " is malformed");
      return !listing.entries.empty();
    }
    ZipEntry entry;
    entry.flags = zip.u16(pos + 8);
    entry.method = zip.u16(pos + 10);
    entry.crc = zip.u32(pos + 16);
    entry.compressed_size = zip.u32(pos + 20);
    entry.uncompressed_size = zip.u32(pos + 24);
    const std::uint16_t name_len = zip.u16(pos + 28);
    const std::uint16_t extra_len = zip.u16(pos + 30);
    const std::uint16_t comment_len = zip.u16(pos + 32);
    std::uint64_t local = zip.u32(pos + 42);
    if (!zip.has(pos + 46, static_cast<std::uint64_t>(name_len) + extra_len + comment_len)) {
      listing.warnings.push_back("central directory entry " + std::to_string(i) +
                                 " is truncated");
      return !listing.entries.empty();
    }
    entry.name = zip.str(pos + 46, name_len);
    apply_zip64_extra(zip, pos + 46 + name_len, extra_len, entry, local);
    pos += 46 + static_cast<std::uint64_t>(name_len) + extra_len + comment_len;

    const auto data = local_data_offset(zip, local + shift);
    if (!data) {
      listing.warnings.push_back("local header for '" + entry.name + "' is missing");
      continue;
    }
    entry.data_offset = *data;
    listing.entries.push_back(std::move(entry));
  }
  return true;
}

std::uint64_t find_next_signature(const ByteView& zip, std::uint64_t from) {
  for (std::uint64_t pos = from; pos + 4 <= zip.size(); ++pos) {
    const std::uint32_t sig = zip.u32(pos);
    if (sig == kLocalSig || sig == kCentralSig || sig == kDescriptorSig || sig == kEndSig) {
      return pos;
    }
  }
  return zip.size();
}

void scan_local_headers(const ByteView& zip, ZipListing& listing) {
  std::uint64_t pos = 0;
  while (zip.has(pos, 30) && zip.u32(pos) == kLocalSig) {
    ZipEntry entry;
    entry.flags = zip.u16(pos + 6);
    entry.method = zip.u16(pos + 8);
    entry.crc = zip.u32(pos + 14);
    entry.compressed_size = zip.u32(pos + 18);
    entry.uncompressed_size = zip.u32(pos + 22);
    const std::uint16_t name_len = zip.u16(pos + 26);
    const std::uint16_t extra_len = zip.u16(pos + 28);
    if (!zip.has(pos + 30, static_cast<std::uint64_t>(name_len) + extra_len)) {
      listing.warnings.push_back("truncated local header");
      return;
    }
    entry.name = zip.str(pos + 30, name_len);
    std::uint64_t unused_offset = 0;
    apply_zip64_extra(zip, pos + 30 + name_len, extra_len, entry, unused_offset);
    entry.data_offset = pos + 30 + name_len + extra_len;
    const bool sizes_deferred = (entry.flags & 0x8u) != 0 && entry.compressed_size == 0;
    if (sizes_deferred || !zip.has(entry.data_offset, entry.compressed_size)) {
      entry.compressed_size = find_next_signature(zip, entry.data_offset) - entry.data_offset;
    }
    pos = entry.data_offset + entry.compressed_size;
    if (zip.has(pos, 4) && zip.u32(pos) == kDescriptorSig) pos += 16;
    listing.entries.push_back(std::move(entry));
  }
}

std::uint64_t parse_tar_number(const std::uint8_t* field, std::size_t len) {
  if (field[0] & 0x80) {
    std::uint64_t v = field[0] & 0x7f;
    for (std::size_t i = 1; i < len; ++i) {
      if (v > (std::numeric_limits<std::uint64_t>::max() >> 8)) {
        return std::numeric_limits<std::uint64_t>::max();
      }
      v = (v << 8) | field[i];
    }
    return v;
  }
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < len && (field[i] == ' ' || field[i] == 0)) ++i;
  for (; i < len && field[i] >= '0' && field[i] <= '7'; ++i) {
    if (v > (std::numeric_limits<std::uint64_t>::max() >> 3)) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    v = (v << 3) | static_cast<std::uint64_t>(field[i] - '0');
  }
  return v;
}

std::string c_string(const std::uint8_t* field, std::size_t len) {
  const auto* end = static_cast<const std::uint8_t*>(std::memchr(field, 0, len));
  return {reinterpret_cast<const char*>(field),
          end ? static_cast<std::size_t>(end - field) : len};
}

bool tar_checksum_ok(const std::uint8_t* block) {
  const std::uint64_t stored = parse_tar_number(block + 148, 8);
  std::uint64_t unsigned_sum = 0;
  std::int64_t signed_sum = 0;
  for (int i = 0; i < 512; ++i) {
    const std::uint8_t b = (i >= 148 && i < 156) ? ' ' : block[i];
    unsigned_sum += b;
    signed_sum += static_cast<std::int8_t>(b);
  }
  return stored == unsigned_sum || static_cast<std::int64_t>(stored) == signed_sum;
}

// "len key=value\n" records.
void parse_pax(std::string_view records, std::optional<std::string>& path,
               std::optional<std::uint64_t>& size) {
  while (!records.empty()) {
    const auto space = records.find(' ');
    if (space == std::string_view::npos) return;
    std::size_t len = 0;
    for (char c : records.substr(0, space)) {
      if (c < '0' || c > '9') return;
      len = len * 10 + static_cast<std::size_t>(c - '0');
      if (len > records.size()) return;
    }
    if (len <= space + 1 || len > records.size()) return;
    std::string_view record = records.substr(space + 1, len - space - 1);
    if (!record.empty() && record.back() == '\n') record.remove_suffix(1);
    const auto eq = record.find('=');
    if (eq != std::string_view::npos) {
      const auto key = record.substr(0, eq);
      const auto value = record.substr(eq + 1);
      if (key == "path") {
        path = std::string(value);
      } else if (key == "size") {
        std::uint64_t v = 0;
        bool ok = !value.empty();
        for (char c : value) {
          if (c < '0' || c > '9') ok = false;
          else v = v * 10 + static_cast<std::uint64_t>(c - '0');
        }
        if (ok) size = v;
      }
    }
    records.remove_prefix(len);
  }
}

}  // namespace

ZipListing list_zip(std::span<const std::uint8_t> archive) {
  ZipListing listing;
  const ByteView zip(archive);
  bool listed = false;
  if (const auto eocd = find_end_record(zip)) {
    listed = list_central(zip, *eocd, listing);
  } else {
    listing.warnings.push_back("no end of central directory record");
  }
  if (!listed) {
    listing.entries.clear();
    scan_local_headers(zip, listing);
  }
  return listing;
}

codecs::DecodeResult read_zip_entry(std::span<const std::uint8_t> archive,
                                    const ZipEntry& entry, std::uint64_t max_output) {
  codecs::DecodeResult result;
  if (entry.is_encrypted()) {
    result.error = "encrypted entry";
    return result;
  }
  const ByteView zip(archive);
  std::uint64_t available = entry.compressed_size;
  bool truncated = false;
  if (!zip.has(entry.data_offset, available)) {
    available = entry.data_offset < zip.size() ? zip.size() - entry.data_offset : 0;
    truncated = true;
  }
  const auto data = zip.sub(entry.data_offset, available);
  switch (entry.method) {
    case 0: {
      const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(data.size(), max_output));
      result.data.assign(reinterpret_cast<const char*>(data.data()), n);
      result.limit_hit = data.size() > max_output;
      result.complete = !result.limit_hit && !truncated;
      break;
    }
    case 8:
      result = codecs::decompress(codecs::Codec::kRawDeflate, data, max_output);
      break;
    case 12:
      result = codecs::decompress(codecs::Codec::kBzip2, data, max_output);
      break;
    case 14:
      result = codecs::decompress(codecs::Codec::kZipLzma, data, max_output);
      break;
    default:
      result.error = "unsupported compression method " + std::to_string(entry.method);
      return result;
  }
  if (truncated && result.error.empty()) {
    result.error = "entry data runs past end of archive";
    result.complete = false;
  }
  if (result.complete && result.error.empty() && codecs::crc32(result.data) != entry.crc) {
    result.error = "crc mismatch";
  }
  return result;
}

void ZipWriter::add(std::string_view name, std::string_view data, bool deflate) {
  if (data.size() > 0xffffffffu || out_.size() > 0xffffffffu) {
    throw Error(ErrorCode::kInvalidArgument, "zip64 output is not supported");
  }
  Record record;
  record.name = std::string(name);
  record.method = deflate ? 8 : 0;
  record.crc = codecs::crc32(data);
  record.uncompressed_size = static_cast<std::uint32_t>(data.size());
  record.offset = static_cast<std::uint32_t>(out_.size());
  const std::string payload =
      deflate ? codecs::compress(codecs::Codec::kRawDeflate, data) : std::string(data);
  record.compressed_size = static_cast<std::uint32_t>(payload.size());

  put32(out_, kLocalSig);
  put16(out_, 20);
  put16(out_, 0);
  put16(out_, record.method);
  put16(out_, 0);       // time 00:00:00
  put16(out_, 0x0021);  // date 1980-01-01
  put32(out_, record.crc);
  put32(out_, record.compressed_size);
  put32(out_, record.uncompressed_size);
  put16(out_, static_cast<std::uint16_t>(record.name.size()));
  put16(out_, 0);
  out_ += record.name;
  out_ += payload;
  records_.push_back(std::move(record));
}

std::string ZipWriter::finish() {
  const auto cd_offset = static_cast<std::uint32_t>(out_.size());
  for (const auto& r : records_) {
    put32(out_, kCentralSig);
    put16(out_, 20);
    put16(out_, 20);
    put16(out_, 0);
    put16(out_, r.method);
    put16(out_, 0);
    put16(out_, 0x0021);
    put32(out_, r.crc);
    put32(out_, r.compressed_size);
    put32(out_, r.uncompressed_size);
    put16(out_, static_cast<std::uint16_t>(r.name.size()));
    put16(out_, 0);
    put16(out_, 0);
    put16(out_, 0);
    put16(out_, 0);
    put32(out_, 0);
    put32(out_, r.offset);
    out_ += r.name;
  }
  const auto cd_size = static_cast<std::uint32_t>(out_.size() - cd_offset);
  put32(out_, kEndSig);
  put16(out_, 0);
  put16(out_, 0);
  put16(out_, static_cast<std::uint16_t>(records_.size()));
  put16(out_, static_cast<std::uint16_t>(records_.size()));
  put32(out_, cd_size);
  put32(out_, cd_offset);
  put16(out_, 0);
  records_.clear();
  return std::move(out_);
}

TarListing list_tar(std::span<const std::uint8_t> archive) {
  TarListing listing;
  const std::uint64_t size = archive.size();
  std::uint64_t pos = 0;
  std::optional<std::string> long_name;
  std::optional<std::string> pax_path;
  std::optional<std::uint64_t> pax_size;
  while (pos + 512 <= size) {
    const std::uint8_t* block = archive.data() + pos;
    if (std::all_of(block, block + 512, [](std::uint8_t b) { return b == 0; })) break;
    if (!tar_checksum_ok(block)) {
      listing.warnings.push_back("bad header checksum at offset " + std::to_string(pos));
      break;
    }
    const char type = static_cast<char>(block[156]);
    std::uint64_t entry_size = parse_tar_number(block + 124, 12);
    if (pax_size && (type == '0' || type == '\0' || type == '7')) entry_size = *pax_size;
    const std::uint64_t data = pos + 512;
    const std::uint64_t available = data <= size ? size - data : 0;
    const bool truncated = entry_size > available;

    switch (type) {
      case 'L':
        long_name = c_string(block + 512, static_cast<std::size_t>(
                                              std::min<std::uint64_t>(entry_size, available)));
        break;
      case 'x':
        parse_pax({reinterpret_cast<const char*>(archive.data() + data),
                   static_cast<std::size_t>(std::min<std::uint64_t>(entry_size, available))},
                  pax_path, pax_size);
        break;
      case '0':
      case '\0':
      case '7': {
        TarEntry entry;
        if (pax_path) {
          entry.name = *pax_path;
        } else if (long_name) {
          entry.name = *long_name;
        } else {
          entry.name = c_string(block, 100);
          const bool posix = std::memcmp(block + 257, "ustar\0", 6) == 0;
          const std::string prefix = posix ? c_string(block + 345, 155) : std::string();
          if (!prefix.empty()) entry.name = prefix + "/" + entry.name;
        }
        entry.data_offset = data;
        entry.size = truncated ? available : entry_size;
        entry.truncated = truncated;
        listing.entries.push_back(std::move(entry));
        long_name.reset();
        pax_path.reset();
        pax_size.reset();
        break;
      }
      default:
        // Directories, links, devices, global pax headers.
        if (type != 'g') {
          long_name.reset();
          pax_path.reset();
          pax_size.reset();
        }
        break;
    }
    if (truncated) {
      listing.warnings.push_back("entry at offset " + std::to_string(pos) +
                                 " runs past end of archive");
      break;
    }
    const std::uint64_t padded = (entry_size + 511) / 512 * 512;
    pos = data + padded;
  }
  return listing;
}

void TarWriter::add(std::string_view name, std::string_view data) {
  std::uint8_t header[512] = {};
  std::string_view short_name = name;
  std::string_view prefix;
  if (name.size() > 100) {
    const auto slash = name.rfind('/', 155);
    if (slash == std::string_view::npos || name.size() - slash - 1 > 100) {
      throw Error(ErrorCode::kInvalidArgument, "tar member name too long");
    }
    prefix = name.substr(0, slash);
    short_name = name.substr(slash + 1);
  }
  std::memcpy(header, short_name.data(), short_name.size());
  std::memcpy(header + 100, "0000644", 7);
  std::memcpy(header + 108, "0000000", 7);
  std::memcpy(header + 116, "0000000", 7);
  std::snprintf(reinterpret_cast<char*>(header + 124), 12, "%011llo",
                static_cast<unsigned long long>(data.size()));
  std::memcpy(header + 136, "00000000000", 11);
  header[156] = '0';
  std::memcpy(header + 257, "ustar", 6);
  std::memcpy(header + 263, "00", 2);
  std::memcpy(header + 345, prefix.data(), prefix.size());
  std::memset(header + 148, ' ', 8);
  unsigned sum = 0;
  for (auto b : header) sum += b;
  std::snprintf(reinterpret_cast<char*>(header + 148), 8, "%06o", sum);
  header[155] = ' ';
  out_.append(reinterpret_cast<const char*>(header), 512);
  out_ += data;
  out_.append((512 - data.size() % 512) % 512, '\0');
}

std::string TarWriter::finish() {
  out_.append(1024, '\0');
  out_.append((10240 - out_.size() % 10240) % 10240, '\0');
  return std::move(out_);
}

}  // namespace pickle_sentry::archive
