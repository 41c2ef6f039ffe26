// Copyright 2026  The xmalign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xmalign/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "xmalign/errors.hpp"
#include "xmalign/rng.hpp"

namespace xmalign {

void ByteWriter::u8(std::uint8_t v) { buf_.push_back(v); }

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back((v >> (8 * i)) & 0xff);
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back((v >> (8 * i)) & 0xff);
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64_array(std::span<const double> v) {
  for (double x : v) f64(x);
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) {
  if (pos_ + n > buf_.size()) throw ChecksumError("unexpected end of payload");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return buf_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<double> ByteReader::f64_array(std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f64();
  return out;
}

std::string ByteReader::str() {
  std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + p.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& p,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + p.string());
}

void write_file_atomic(const std::filesystem::path& p, std::string_view text) {
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw IoError("rename to " + p.string() + " failed: " + ec.message());
}

std::uint64_t file_checksum(const std::filesystem::path& p) {
  auto bytes = read_file_bytes(p);
  return fnv1a64(bytes.data(), bytes.size());
}

namespace {
constexpr std::size_t kMagicLen = 8;
}

void write_container(const std::filesystem::path& p, std::string_view magic,
                     std::uint32_t version, const ByteWriter& payload) {
  if (magic.size() != kMagicLen) throw ValidationError("magic must be 8 bytes");
  ByteWriter header;
  for (char c : magic) header.u8(static_cast<std::uint8_t>(c));
  header.u32(version);
  header.u64(payload.bytes().size());
  header.u64(fnv1a64(payload.bytes().data(), payload.bytes().size()));
  std::vector<std::uint8_t> all = header.bytes();
  all.insert(all.end(), payload.bytes().begin(), payload.bytes().end());
  write_file_bytes(p, all);
}

std::vector<std::uint8_t> read_container(const std::filesystem::path& p,
                                         std::string_view magic,
                                         std::uint32_t version) {
  auto bytes = read_file_bytes(p);
  constexpr std::size_t header_len = kMagicLen + 4 + 8 + 8;
  if (bytes.size() < header_len) {
    throw ChecksumError("file too short for header: " + p.string());
  }
  if (std::memcmp(bytes.data(), magic.data(), kMagicLen) != 0) {
    throw VersionError("bad magic in " + p.string());
  }
  ByteReader r(std::span<const std::uint8_t>(bytes).subspan(kMagicLen));
  std::uint32_t got_version = r.u32();
  if (got_version != version) {
    throw VersionError("unsupported version " + std::to_string(got_version) +
                       " in " + p.string());
  }
  std::uint64_t payload_len = r.u64();
  std::uint64_t checksum = r.u64();
  if (bytes.size() - header_len != payload_len) {
    throw ChecksumError("payload length mismatch in " + p.string());
  }
  std::vector<std::uint8_t> payload(bytes.begin() + header_len, bytes.end());
  if (fnv1a64(payload.data(), payload.size()) != checksum) {
    throw ChecksumError("payload checksum mismatch in " + p.string());
  }
  return payload;
}

}  // namespace xmalign
