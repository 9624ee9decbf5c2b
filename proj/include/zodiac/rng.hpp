// Copyright 2026 The zodiac-pb Authors
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
#include <random>
#include <string_view>

namespace zodiac {

using Rng = std::mt19937_64;

namespace rng {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a; only used to fold the optional salt string into the seed.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream tags keep the master stream and the per-agent streams disjoint.
enum class Tag : std::uint64_t {
  kAgent = 1,
  kMaster = 2,
  kTopology = 3,
  kProblem = 4,
  kBaseline = 5,
};

// stream(seed, tag, index) = mt19937_64 seeded from
// splitmix64(splitmix64(seed ^ fnv1a(salt)) ^ tag*K ^ index). Changing the
// number of agents never reshuffles another agent's stream.
inline Rng stream(std::uint64_t seed, Tag tag, std::uint64_t index,
                  std::string_view salt = {}) {
  std::uint64_t base = splitmix64(seed ^ (salt.empty() ? 0 : fnv1a(salt)));
  std::uint64_t mixed =
      splitmix64(base ^ (static_cast<std::uint64_t>(tag) * 0xD6E8FEB86659FD93ULL) ^
                 splitmix64(index));
  std::seed_seq seq{static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(tag)};
  return Rng(seq);
}

}  // namespace rng
}  // namespace zodiac
