// Copyright 2026 The Trainsim Authors.
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

#ifndef TRAINSIM_RNG_HPP_
#define TRAINSIM_RNG_HPP_

#include <cstdint>

namespace trainsim {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen over std:: engines because the
// distribution helpers below are pinned to this exact bit stream, making every
// sampled value identical across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of randomness.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Rejection-free modulo bias is negligible for the
  // n values used here (<= 2^40), but we reject anyway for exactness.
  std::uint64_t next_below(std::uint64_t n);

  // Fresh generator whose stream is independent of this one.
  Rng fork() { return Rng(next_u64() ^ 0x6a09e667f3bcc909ULL); }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
  std::uint64_t v = next_u64();
  while (v > limit) v = next_u64();
  return v % n;
}

// Fixed seedable integer hash used wherever a reproducible "random" placement
// is needed (hash row distribution, synthetic raw records). Documented so
// plans and traces are stable across builds.
inline std::uint64_t mix_hash(std::uint64_t x, std::uint64_t seed) {
  std::uint64_t z = x + seed * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace trainsim

#endif  // TRAINSIM_RNG_HPP_
