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

#include "gpufp/protocol.hpp"

#include "gpufp/bytes.hpp"

namespace gpufp {

const char* to_string(DecodeErrorCode code) noexcept {
  switch (code) {
    case DecodeErrorCode::kShortBuffer: return "short-buffer";
    case DecodeErrorCode::kBadVersion: return "bad-version";
    case DecodeErrorCode::kBadMessageType: return "bad-message-type";
    case DecodeErrorCode::kReservedNonZero: return "reserved-nonzero";
    case DecodeErrorCode::kElementCount: return "element-count";
    case DecodeErrorCode::kTrailingBytes: return "trailing-bytes";
  }
  return "unknown";
}

DecodeError::DecodeError(DecodeErrorCode code, const std::string& what)
    : Error(ErrorKind::kDecode, std::string("decode error (") + to_string(code) + "): " + what),
      code_(code) {}

namespace {

[[noreturn]] void decode_fail(DecodeErrorCode code, const std::string& what) { throw DecodeError(code, what); }

void check_version(std::uint16_t v) {
  if (v != kProtocolVersion) {
    fail(ErrorKind::kParameter, "cannot encode protocol version " + std::to_string(v));
  }
}

// Shared 4-byte prefix plus challenge id.
std::uint64_t read_header(ByteReader& r, MessageType expected) {
  std::uint16_t version;
  std::uint8_t type;
  std::uint8_t reserved;
  if (!r.u16(version) || !r.u8(type) || !r.u8(reserved)) {
    decode_fail(DecodeErrorCode::kShortBuffer, "message shorter than its 4-byte prefix");
  }
  if (version != kProtocolVersion) {
    decode_fail(DecodeErrorCode::kBadVersion, "unsupported protocol version " + std::to_string(version));
  }
  if (type != static_cast<std::uint8_t>(expected)) {
    decode_fail(DecodeErrorCode::kBadMessageType, "unexpected message type " + std::to_string(type));
  }
  if (reserved != 0) decode_fail(DecodeErrorCode::kReservedNonZero, "reserved byte is not zero");
  std::uint64_t id;
  if (!r.u64(id)) decode_fail(DecodeErrorCode::kShortBuffer, "truncated challenge id");
  return id;
}

void write_header(ByteWriter& w, std::uint16_t version, MessageType type, std::uint64_t id) {
  w.u16(version);
  w.u8(static_cast<std::uint8_t>(type));
  w.u8(0);
  w.u64(id);
}

}  // namespace

std::vector<std::uint8_t> encode_challenge(const ChallengeMessage& msg) {
  check_version(msg.protocol_version);
  ByteWriter w;
  write_header(w, msg.protocol_version, MessageType::kChallenge, msg.challenge_id);
  w.u64(msg.seed.lo);
  w.u64(msg.seed.hi);
  w.i64(msg.issued_at_ns);
  return std::move(w).take();
}

ChallengeMessage decode_challenge(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ChallengeMessage msg;
  msg.challenge_id = read_header(r, MessageType::kChallenge);
  if (!r.u64(msg.seed.lo) || !r.u64(msg.seed.hi) || !r.i64(msg.issued_at_ns)) {
    decode_fail(DecodeErrorCode::kShortBuffer, "challenge needs " + std::to_string(kChallengeWireSize) +
                                                   " bytes, got " + std::to_string(bytes.size()));
  }
  if (r.remaining() != 0) {
    decode_fail(DecodeErrorCode::kTrailingBytes, std::to_string(r.remaining()) + " bytes after challenge");
  }
  return msg;
}

std::vector<std::uint8_t> encode_response(const ResponseMessage& msg) {
  check_version(msg.protocol_version);
  if (msg.elements.size() != msg.layout.size()) {
    fail(ErrorKind::kDimension, "response element count does not match its layout");
  }
  ByteWriter w;
  write_header(w, msg.protocol_version, MessageType::kResponse, msg.challenge_id);
  w.u32(msg.layout.n_sms);
  w.u32(msg.layout.n_rounds);
  w.u32(static_cast<std::uint32_t>(msg.elements.size()));
  for (std::uint32_t e : msg.elements) w.u32(e);
  return std::move(w).take();
}

ResponseMessage decode_response(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ResponseMessage msg;
  msg.challenge_id = read_header(r, MessageType::kResponse);
  std::uint32_t count;
  if (!r.u32(msg.layout.n_sms) || !r.u32(msg.layout.n_rounds) || !r.u32(count)) {
    decode_fail(DecodeErrorCode::kShortBuffer, "truncated response header");
  }
  if (static_cast<std::uint64_t>(msg.layout.n_sms) * msg.layout.n_rounds != count) {
    decode_fail(DecodeErrorCode::kElementCount,
                "element count " + std::to_string(count) + " != " + std::to_string(msg.layout.n_sms) +
                    " x " + std::to_string(msg.layout.n_rounds));
  }
  const std::uint64_t need = 4ull * count;
  if (r.remaining() < need) {
    decode_fail(DecodeErrorCode::kShortBuffer, "response body needs " + std::to_string(need) + " bytes, got " +
                                                   std::to_string(r.remaining()));
  }
  if (r.remaining() > need) {
    decode_fail(DecodeErrorCode::kTrailingBytes, std::to_string(r.remaining() - need) + " bytes after response");
  }
  msg.elements.resize(count);
  for (auto& e : msg.elements) r.u32(e);
  return msg;
}

std::variant<ChallengeMessage, ResponseMessage> decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) decode_fail(DecodeErrorCode::kShortBuffer, "message shorter than its 4-byte prefix");
  switch (bytes[2]) {
    case static_cast<std::uint8_t>(MessageType::kChallenge): return decode_challenge(bytes);
    case static_cast<std::uint8_t>(MessageType::kResponse): return decode_response(bytes);
    default: break;
  }
  // Keep version errors ahead of type errors, matching the typed decoders.
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
  if (version != kProtocolVersion) {
    decode_fail(DecodeErrorCode::kBadVersion, "unsupported protocol version " + std::to_string(version));
  }
  decode_fail(DecodeErrorCode::kBadMessageType, "unknown message type " + std::to_string(bytes[2]));
}

ResponseMessage make_response(std::uint64_t challenge_id, const Fingerprint& fp) {
  ResponseMessage msg;
  msg.challenge_id = challenge_id;
  msg.layout = fp.layout;
  msg.elements = fp.elements;
  return msg;
}

Fingerprint to_fingerprint(const ResponseMessage& msg, const Seed& seed) {
  return Fingerprint{seed, msg.layout, msg.elements};
}

}  // namespace gpufp
