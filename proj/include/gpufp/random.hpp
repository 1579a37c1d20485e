/*
 * Copyright 2026 The gpufp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace gpufp {

// Distributions are implemented here rather than taken from <random>: the
// standard distributions are implementation-defined, and every simulated
// output in this project must be bit-reproducible for a fixed seed.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a list of words. Used to derive independent
/// streams from structured keys such as (seed, sm, round).
inline constexpr std::uint64_t kHashInit = 0x6a09e667f3bcc908ULL;

/// One folding step of hash_words; lets callers hoist shared key prefixes.
constexpr std::uint64_t hash_step(std::uint64_t h, std::uint64_t w) noexcept { return splitmix64(h ^ splitmix64(w)); }

constexpr std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = kHashInit;
  for (std::uint64_t w : words) h = hash_step(h, w);
  return h;
}

/// Maps 64 random bits to a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Standard normal from two independent 64-bit words (Box-Muller).
inline double normal_from_bits(std::uint64_t a, std::uint64_t b) noexcept {
  const double u1 = 1.0 - to_unit(a);  // (0, 1]
  const double u2 = to_unit(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Standard normal keyed by a structured hash; a pure function of `key`.
inline double keyed_normal(std::uint64_t key) noexcept {
  return normal_from_bits(splitmix64(key ^ 0x243f6a8885a308d3ULL),
                          splitmix64(key ^ 0x13198a2e03707344ULL));
}

/// Small sequential generator (SplitMix64 stream).
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr double uniform() noexcept { return to_unit(next()); }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; bias is < 2^-64 * n and irrelevant here.
    __extension__ typedef unsigned __int128 u128;
    return static_cast<std::uint64_t>((static_cast<u128>(next()) * n) >> 64);
  }

  double normal() noexcept {
    const std::uint64_t a = next();
    const std::uint64_t b = next();
    return normal_from_bits(a, b);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace gpufp
