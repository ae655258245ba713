// Copyright 2026 The datamkt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace datamkt {

/// splitmix64 step (Steele, Lea, Flood 2014). Fully specified, used only for
/// seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a root seed and a path of stream identifiers.
/// Each path element is absorbed with one splitmix64 round, so
/// (seed, {a, b}) and (seed, {b, a}) land in unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = seed;
  (void)splitmix64(s);
  for (std::uint64_t p : path) {
    s ^= p + 0x9e3779b97f4a7c15ULL;
    (void)splitmix64(s);
  }
  return s;
}

/// One independent random stream. Backed by std::mt19937_64 (fully specified
/// by the standard), with uniform doubles produced from the top 53 bits so the
/// sequence is bit-identical across platforms and standard libraries.
class Substream {
 public:
  explicit Substream(std::uint64_t seed) : gen_(seed) {}
  Substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
      : gen_(derive_seed(seed, path)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform draw on the half-open interval [lo, hi).
  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace datamkt
