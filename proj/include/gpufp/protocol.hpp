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

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "gpufp/common.hpp"
#include "gpufp/fingerprint.hpp"

namespace gpufp {

// Wire format, little-endian, byte-exact (see docs/protocol.md).
//
// Challenge, 36 bytes:
//   0  u16 version | 2 u8 type=1 | 3 u8 reserved=0 | 4 u64 challenge_id
//   12 u64 seed low word | 20 u64 seed high word | 28 i64 issued_at_ns
//
// Response, 24 + 4n bytes:
//   0  u16 version | 2 u8 type=2 | 3 u8 reserved=0 | 4 u64 challenge_id
//   12 u32 n_sms | 16 u32 n_rounds | 20 u32 element count n | 24 u32[n] elements

inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::size_t kChallengeWireSize = 36;
inline constexpr std::size_t kResponseHeaderSize = 24;

enum class MessageType : std::uint8_t { kChallenge = 1, kResponse = 2 };

struct ChallengeMessage {
  std::uint16_t protocol_version = kProtocolVersion;
  std::uint64_t challenge_id = 0;
  Seed seed;
  std::int64_t issued_at_ns = 0;

  friend bool operator==(const ChallengeMessage&, const ChallengeMessage&) = default;
};

struct ResponseMessage {
  std::uint16_t protocol_version = kProtocolVersion;
  std::uint64_t challenge_id = 0;
  Layout layout;
  std::vector<std::uint32_t> elements;

  friend bool operator==(const ResponseMessage&, const ResponseMessage&) = default;
};

enum class DecodeErrorCode {
  kShortBuffer,
  kBadVersion,
  kBadMessageType,
  kReservedNonZero,
  kElementCount,
  kTrailingBytes,
};

const char* to_string(DecodeErrorCode code) noexcept;

class DecodeError : public Error {
 public:
  DecodeError(DecodeErrorCode code, const std::string& what);
  DecodeErrorCode code() const noexcept { return code_; }

 private:
  DecodeErrorCode code_;
};

std::vector<std::uint8_t> encode_challenge(const ChallengeMessage& msg);
ChallengeMessage decode_challenge(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_response(const ResponseMessage& msg);
ResponseMessage decode_response(std::span<const std::uint8_t> bytes);

/// Dispatches on the type byte.
std::variant<ChallengeMessage, ResponseMessage> decode_message(std::span<const std::uint8_t> bytes);

ResponseMessage make_response(std::uint64_t challenge_id, const Fingerprint& fp);
/// Rebuilds the fingerprint a response carries; the seed comes from the
/// verifier's record of the challenge, not from the wire.
Fingerprint to_fingerprint(const ResponseMessage& msg, const Seed& seed);

}  // namespace gpufp
