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

#ifndef XMALIGN_SERIALIZE_HPP_
#define XMALIGN_SERIALIZE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace xmalign {

// Little-endian binary buffer writer/reader for the versioned container
// formats (checkpoints, datasets). Doubles round-trip bit-exactly via their
// IEEE-754 representation.
class ByteWriter {
 public:
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64_array(std::span<const double> v);
  void str(std::string_view s);  // u32 length + bytes

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<double> f64_array(std::size_t n);
  std::string str();

  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n);

  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

// Whole-file helpers. read_file throws IoError when the path is unreadable.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p);
void write_file_bytes(const std::filesystem::path& p,
                      std::span<const std::uint8_t> bytes);
// Writes to a sibling temp file then renames into place.
void write_file_atomic(const std::filesystem::path& p, std::string_view text);

std::uint64_t file_checksum(const std::filesystem::path& p);

// Container envelope shared by checkpoint and dataset files:
//   magic (8 bytes) | version u32 | payload length u64 | payload checksum u64
//   | payload bytes.
// Truncation or corruption surfaces as ChecksumError, an unknown magic or
// version as VersionError.
void write_container(const std::filesystem::path& p, std::string_view magic,
                     std::uint32_t version, const ByteWriter& payload);
std::vector<std::uint8_t> read_container(const std::filesystem::path& p,
                                         std::string_view magic,
                                         std::uint32_t version);

}  // namespace xmalign

#endif  // XMALIGN_SERIALIZE_HPP_
