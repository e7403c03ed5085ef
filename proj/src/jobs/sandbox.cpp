// Copyright 2026 The lgrid Authors
// SPDX-License-Identifier: Apache-2.0

#include "lgrid/jobs/sandbox.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace lgrid::jobs {

namespace {

using Kind = SandboxError::Kind;
constexpr std::size_t kBlock = 512;

// ustar header field offsets and widths
constexpr std::size_t kName = 0, kNameLen = 100;
constexpr std::size_t kMode = 100;
constexpr std::size_t kUid = 108;
constexpr std::size_t kGid = 116;
constexpr std::size_t kSize = 124, kSizeLen = 12;
constexpr std::size_t kMtime = 136;
constexpr std::size_t kChksum = 148;
constexpr std::size_t kType = 156;
constexpr std::size_t kMagic = 257;
constexpr std::size_t kPrefix = 345, kPrefixLen = 155;

using Header = std::array<char, kBlock>;

void put_octal(Header& h, std::size_t off, std::size_t width, std::uint64_t value) {
  // width - 1 digits, then NUL
  std::string digits(width - 1, '0');
  for (std::size_t i = width - 1; i-- > 0 && value;) {
    digits[i] = static_cast<char>('0' + (value & 7));
    value >>= 3;
  }
  if (value) throw SandboxError(Kind::kUnsupported, "value too large for tar header");
  std::memcpy(h.data() + off, digits.data(), width - 1);
  h[off + width - 1] = '\0';
}

void put_string(Header& h, std::size_t off, std::size_t width, std::string_view s) {
  std::memcpy(h.data() + off, s.data(), std::min(width, s.size()));
}

unsigned header_checksum(const char* block, bool as_signed) {
  unsigned sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    if (i >= kChksum && i < kChksum + 8) {
      sum += ' ';
    } else if (as_signed) {
      sum += static_cast<unsigned>(static_cast<int>(static_cast<signed char>(block[i])));
    } else {
      sum += static_cast<unsigned char>(block[i]);
    }
  }
  return sum;
}

Header make_header(std::string_view name, std::string_view prefix, std::uint64_t size, char type) {
  Header h{};
  put_string(h, kName, kNameLen, name);
  put_octal(h, kMode, 8, 0644);
  put_octal(h, kUid, 8, 0);
  put_octal(h, kGid, 8, 0);
  put_octal(h, kSize, kSizeLen, size);
  put_octal(h, kMtime, 12, 0);
  h[kType] = type;
  std::memcpy(h.data() + kMagic, "ustar\0" "00", 8);
  put_string(h, kPrefix, kPrefixLen, prefix);
  unsigned sum = header_checksum(h.data(), false);
  // six octal digits, NUL, space
  put_octal(h, kChksum, 7, sum);
  h[kChksum + 7] = ' ';
  return h;
}

void append_padded(std::string& out, std::string_view data) {
  out.append(data);
  auto rem = data.size() % kBlock;
  if (rem) out.append(kBlock - rem, '\0');
}

std::string pax_record(std::string_view key, std::string_view value) {
  // "<len> key=value\n", where len counts its own digits
  std::size_t body = 1 + key.size() + 1 + value.size() + 1;
  std::size_t len = body + 1;
  while (std::to_string(len).size() + body != len) ++len;
  return std::to_string(len) + " " + std::string(key) + "=" + std::string(value) + "\n";
}

std::string field_string(const char* block, std::size_t off, std::size_t width) {
  const char* p = block + off;
  return std::string(p, strnlen(p, width));
}

std::uint64_t parse_size(const char* block) {
  const auto* p = reinterpret_cast<const unsigned char*>(block + kSize);
  if (p[0] & 0x80) {  // base-256
    std::uint64_t v = p[0] & 0x7f;
    for (std::size_t i = 1; i < kSizeLen; ++i) {
      if (v >> 56) throw SandboxError(Kind::kUnsupported, "entry too large");
      v = (v << 8) | p[i];
    }
    return v;
  }
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < kSizeLen && (p[i] == ' ' || p[i] == '\0')) ++i;
  for (; i < kSizeLen && p[i] >= '0' && p[i] <= '7'; ++i) v = (v << 3) | (p[i] - '0');
  return v;
}

std::string parse_pax_path(std::string_view data) {
  std::string path;
  while (!data.empty()) {
    auto space = data.find(' ');
    if (space == std::string_view::npos) throw SandboxError(Kind::kCorrupt, "bad pax record");
    std::size_t len = 0;
    for (char c : data.substr(0, space)) {
      if (c < '0' || c > '9') throw SandboxError(Kind::kCorrupt, "bad pax record length");
      len = len * 10 + (c - '0');
    }
    if (len <= space + 1 || len > data.size()) throw SandboxError(Kind::kCorrupt, "bad pax record");
    auto rec = data.substr(space + 1, len - space - 2);  // drop trailing \n
    auto eq = rec.find('=');
    if (eq != std::string_view::npos && rec.substr(0, eq) == "path") {
      path = std::string(rec.substr(eq + 1));
    }
    data.remove_prefix(len);
  }
  return path;
}

bool all_zero(const char* block) {
  for (std::size_t i = 0; i < kBlock; ++i) {
    if (block[i]) return false;
  }
  return true;
}

}  // namespace

std::string checked_relative_path(std::string_view path) {
  if (path.empty()) throw SandboxError(Kind::kPathEscape, "empty path");
  if (path.find('\0') != std::string_view::npos) {
    throw SandboxError(Kind::kPathEscape, "NUL byte in path");
  }
  if (path.front() == '/') throw SandboxError(Kind::kPathEscape, "absolute path " + std::string(path));
  std::string out;
  std::size_t i = 0;
  while (i <= path.size()) {
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    auto part = path.substr(i, j - i);
    if (part == "..") throw SandboxError(Kind::kPathEscape, "path escapes sandbox: " + std::string(path));
    if (!part.empty() && part != ".") {
      if (!out.empty()) out += '/';
      out += part;
    }
    i = j + 1;
  }
  if (out.empty()) throw SandboxError(Kind::kPathEscape, "path names no file: " + std::string(path));
  return out;
}

std::string pack(const std::vector<SandboxEntry>& entries) {
  std::string tar;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    auto path = checked_relative_path(e.path);
    if (!seen.insert(path).second) throw SandboxError(Kind::kCorrupt, "duplicate entry " + path);

    std::string name = path, prefix;
    if (path.size() > kNameLen) {
      // ustar split at a '/' so that prefix <= 155 and name <= 100
      auto cut = path.rfind('/', kPrefixLen);
      if (cut != std::string::npos && cut > 0 && path.size() - cut - 1 <= kNameLen) {
        prefix = path.substr(0, cut);
        name = path.substr(cut + 1);
      } else {
        auto pax = pax_record("path", path);
        auto h = make_header("PaxHeaders/entry", "", pax.size(), 'x');
        tar.append(h.data(), kBlock);
        append_padded(tar, pax);
        name = path.substr(0, kNameLen);
      }
    }
    auto h = make_header(name, prefix, e.bytes.size(), '0');
    tar.append(h.data(), kBlock);
    append_padded(tar, e.bytes);
  }
  tar.append(2 * kBlock, '\0');
  return gzip_compress(tar);
}

std::vector<SandboxEntry> unpack(std::string_view archive) {
  std::string tar = gzip_decompress(archive);
  std::vector<SandboxEntry> out;
  std::set<std::string> seen;
  std::string pending_name;
  std::size_t pos = 0;

  auto body = [&](std::uint64_t size) {
    if (size > tar.size() - pos) throw SandboxError(Kind::kCorrupt, "truncated archive");
    auto data = std::string_view(tar).substr(pos, size);
    pos += (size + kBlock - 1) / kBlock * kBlock;
    if (pos > tar.size()) pos = tar.size();
    return data;
  };

  for (;;) {
    if (tar.size() - pos < kBlock) throw SandboxError(Kind::kCorrupt, "truncated archive");
    const char* h = tar.data() + pos;
    if (all_zero(h)) break;
    std::string chk = field_string(h, kChksum, 8);
    unsigned want = 0;
    for (char c : chk) {
      if (c >= '0' && c <= '7') want = want * 8 + (c - '0');
    }
    if (want != header_checksum(h, false) && want != header_checksum(h, true)) {
      throw SandboxError(Kind::kCorrupt, "header checksum mismatch");
    }
    char type = h[kType];
    auto size = parse_size(h);
    std::string name = field_string(h, kName, kNameLen);
    if (std::memcmp(h + kMagic, "ustar\0", 6) == 0) {
      auto prefix = field_string(h, kPrefix, kPrefixLen);
      if (!prefix.empty()) name = prefix + "/" + name;
    }
    pos += kBlock;

    switch (type) {
      case 'L': {
        auto data = body(size);
        pending_name = std::string(data.substr(0, strnlen(data.data(), data.size())));
        continue;
      }
      case 'x': {
        auto p = parse_pax_path(body(size));
        if (!p.empty()) pending_name = p;
        continue;
      }
      case 'g':
        body(size);
        continue;
      case '5':
        body(size);
        pending_name.clear();
        continue;
      case '0':
      case '\0':
      case '7':
        break;
      default:
        throw SandboxError(Kind::kUnsupported,
                           std::string("unsupported tar entry type '") + type + "' for " + name);
    }

    if (!pending_name.empty()) name = std::move(pending_name);
    pending_name.clear();
    auto path = checked_relative_path(name);
    if (!seen.insert(path).second) throw SandboxError(Kind::kCorrupt, "duplicate entry " + path);
    out.push_back({path, std::string(body(size))});
  }
  return out;
}

std::string gzip_compress(std::string_view raw) {
  z_stream z{};
  if (deflateInit2(&z, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw SandboxError(Kind::kIo, "deflateInit2 failed");
  }
  std::string out;
  out.resize(deflateBound(&z, raw.size()) + 64);
  z.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
  z.avail_in = static_cast<uInt>(raw.size());
  z.next_out = reinterpret_cast<Bytef*>(out.data());
  z.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&z, Z_FINISH);
  deflateEnd(&z);
  if (rc != Z_STREAM_END) throw SandboxError(Kind::kIo, "deflate did not finish");
  out.resize(z.total_out);
  return out;
}

std::string gzip_decompress(std::string_view compressed, std::size_t limit) {
  z_stream z{};
  if (inflateInit2(&z, 15 + 32) != Z_OK) throw SandboxError(Kind::kIo, "inflateInit2 failed");
  z.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  z.avail_in = static_cast<uInt>(compressed.size());
  std::string out;
  std::array<char, 64 * 1024> buf;
  for (;;) {
    z.next_out = reinterpret_cast<Bytef*>(buf.data());
    z.avail_out = buf.size();
    int rc = inflate(&z, Z_NO_FLUSH);
    out.append(buf.data(), buf.size() - z.avail_out);
    if (out.size() > limit) {
      inflateEnd(&z);
      throw SandboxError(Kind::kCorrupt, "archive expands beyond limit");
    }
    if (rc == Z_STREAM_END) {
      if (z.avail_in == 0) break;
      inflateReset(&z);  // concatenated gzip members
      continue;
    }
    if (rc != Z_OK) {
      inflateEnd(&z);
      throw SandboxError(Kind::kCorrupt, std::string("corrupt gzip stream: ") + (z.msg ? z.msg : "?"));
    }
    if (z.avail_in == 0 && z.avail_out != 0) {
      inflateEnd(&z);
      throw SandboxError(Kind::kCorrupt, "truncated gzip stream");
    }
  }
  inflateEnd(&z);
  return out;
}

std::vector<SandboxEntry> collect_files(const std::filesystem::path& root,
                                        const std::vector<std::string>& relative_paths) {
  std::vector<SandboxEntry> out;
  for (const auto& rel : relative_paths) {
    auto clean = checked_relative_path(rel);
    std::ifstream in(root / clean, std::ios::binary);
    if (!in) throw SandboxError(Kind::kIo, "cannot read " + (root / clean).string());
    std::ostringstream ss;
    ss << in.rdbuf();
    out.push_back({clean, ss.str()});
  }
  return out;
}

}  // namespace lgrid::jobs
