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

#include "gpufp/common.hpp"

#include "gpufp/bytes.hpp"

#include <cmath>
#include <cstdio>

namespace gpufp {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kNoCandidates: return "no-candidates";
    case ErrorKind::kProtocolMisuse: return "protocol-misuse";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kExhaustion: return "exhaustion";
    case ErrorKind::kState: return "state";
    case ErrorKind::kReplayState: return "replay-state";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kScenario: return "scenario";
    case ErrorKind::kDelivery: return "delivery";
    case ErrorKind::kDecode: return "decode";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + " error: " + what);
}

std::string to_string(DeviceId id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gpu-%03llu", static_cast<unsigned long long>(id.value));
  return buf;
}

std::string to_hex(const Seed& seed) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(seed.hi),
                static_cast<unsigned long long>(seed.lo));
  return buf;
}

Seed seed_from_hex(const std::string& text) {
  if (text.size() != 32) fail(ErrorKind::kParameter, "seed hex must have 32 digits");
  auto parse = [&](std::size_t offset) {
    std::uint64_t v = 0;
    for (std::size_t i = offset; i < offset + 16; ++i) {
      const char c = text[i];
      std::uint64_t d;
      if (c >= '0' && c <= '9') d = static_cast<std::uint64_t>(c - '0');
      else if (c >= 'a' && c <= 'f') d = static_cast<std::uint64_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') d = static_cast<std::uint64_t>(c - 'A' + 10);
      else fail(ErrorKind::kParameter, "seed hex contains a non-hex digit");
      v = (v << 4) | d;
    }
    return v;
  };
  return Seed{parse(0), parse(16)};
}

double squared_distance_km(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

double distance_km(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) fail(ErrorKind::kParameter, "hex string has odd length");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    fail(ErrorKind::kParameter, "invalid hex digit");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  return out;
}

}  // namespace gpufp
