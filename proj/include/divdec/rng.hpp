// Copyright 2026 The Divdec Authors.
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

#ifndef DIVDEC_RNG_HPP_
#define DIVDEC_RNG_HPP_

#include <cstdint>
#include <string_view>

namespace divdec {

// Splitmix64 step. Fast, full-period, and identical on every platform, which
// is what the byte-reproducibility guarantees of the harness rest on.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
  }

 private:
  std::uint64_t state_;
};

// Deterministic per-sample substream: every (global seed, document id,
// sample index) triple owns an independent stream, so results do not depend
// on worker count or on the order documents are decoded in.
struct SamplerState {
  Rng rng;

  static SamplerState for_sample(std::uint64_t global_seed,
                                 std::string_view doc_id,
                                 std::uint64_t sample_index) {
    std::uint64_t s = global_seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ fnv1a64(doc_id);
    a = splitmix64(s);
    s = a ^ sample_index;
    return SamplerState{Rng(splitmix64(s))};
  }

  // Child stream for retries and other auxiliary draws.
  SamplerState derived(std::uint64_t salt) {
    std::uint64_t s = rng.next_u64() ^ (0x9e3779b97f4a7c15ull * (salt + 1));
    return SamplerState{Rng(splitmix64(s))};
  }
};

}  // namespace divdec

#endif  // DIVDEC_RNG_HPP_
