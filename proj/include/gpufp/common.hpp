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

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace gpufp {

/// Failure categories surfaced by the library. Every thrown gpufp::Error
/// carries one of these so callers (and the CLI exit-code mapping) can
/// branch without string matching.
enum class ErrorKind {
  kParameter,         // invalid configuration value
  kDimension,         // length / layout mismatch between fingerprints
  kNoCandidates,      // empty gallery
  kProtocolMisuse,    // gallery entries answer a different seed
  kInsufficientData,  // too few entries for a census
  kExhaustion,        // no fresh seed left
  kState,             // illegal seed state transition
  kReplayState,       // consuming an already consumed seed
  kIntegrity,         // corrupt or truncated registry file
  kProtocol,          // unknown challenge id, missing registration
  kScenario,          // malformed scenario or reference to unknown node
  kDelivery,          // simulated packet drop
  kDecode,            // malformed wire message
  kIo,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

/// Opaque device identifier. Ordered so that matching can break ties on it.
struct DeviceId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(const DeviceId&, const DeviceId&) = default;
};

std::string to_string(DeviceId id);

/// 128-bit challenge seed.
struct Seed {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend constexpr auto operator<=>(const Seed&, const Seed&) = default;
};

/// 32 lowercase hex digits, most significant first.
std::string to_hex(const Seed& seed);
Seed seed_from_hex(const std::string& text);

/// Position on the simulation plane, kilometres.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend constexpr bool operator==(const Point&, const Point&) = default;
};

double distance_km(const Point& a, const Point& b);
double squared_distance_km(const Point& a, const Point& b);

/// Speed of light in vacuum, km/s.
inline constexpr double kSpeedOfLight = 299792.458;
/// Two thirds of c, a typical fibre propagation speed.
inline constexpr double kFiberSpeed = 199861.639;

}  // namespace gpufp

template <>
struct std::hash<gpufp::Seed> {
  std::size_t operator()(const gpufp::Seed& s) const noexcept {
    return std::hash<std::uint64_t>{}(s.hi ^ (s.lo * 0x9e3779b97f4a7c15ULL));
  }
};
