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

#ifndef XMALIGN_RNG_HPP_
#define XMALIGN_RNG_HPP_

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace xmalign {

// FNV-1a over arbitrary bytes; also used as the file checksum primitive.
std::uint64_t fnv1a64(const void* bytes, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

// Deterministic PRNG with a fixed, documented algorithm so that every stream
// reproduces bit-for-bit across platforms. Platform generators (rand,
// std::default_random_engine, std distributions) are deliberately not used
// anywhere in this codebase.
//
// Engine: xoshiro256** (Blackman & Vigna), state seeded by four successive
// splitmix64 outputs of the 64-bit seed. Labeled substreams are derived from
// the *seed* (not the stream position), so split(label) is stable no matter
// how much of the parent stream has been consumed.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double next_double();

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi);

  // Standard normal via Box-Muller (two uniform draws per value, no caching,
  // so the stream layout is a pure function of the call sequence).
  double next_gaussian();

  // Unbiased integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);

  // Fisher-Yates using next_below.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent substream keyed by (seed, label).
  RandomSource split(std::string_view label) const;

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace xmalign

#endif  // XMALIGN_RNG_HPP_
