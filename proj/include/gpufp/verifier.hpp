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
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpufp/common.hpp"
#include "gpufp/fingerprint.hpp"
#include "gpufp/geoloc.hpp"
#include "gpufp/registry.hpp"

namespace gpufp {

/// Byte channel between a verifier anchor and the device it challenges.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Current time on the transport's clock.
  virtual std::int64_t now_ns() = 0;
  virtual void send(std::vector<std::uint8_t> payload) = 0;
  /// Next inbound message, or nullopt once `deadline_ns` passes.
  virtual std::optional<std::vector<std::uint8_t>> receive(std::int64_t deadline_ns) = 0;
};

struct IdentityVerdict {
  bool accept = false;
  std::optional<DeviceId> matched_device;
  std::uint64_t distance = 0;  // best distance to the matched device
  std::optional<std::uint64_t> threshold;
  std::string reason;
};

struct TimingVerdict {
  bool accept = false;
  std::int64_t rtt_ns = 0;       // slowest exchange
  double max_distance_km = 0.0;  // bound from rtt_ns at the policy signal speed
  double claimed_distance_km = 0.0;
  double rtt_budget_s = 0.0;
  /// Reply arrived sooner than a device at the claimed location could have
  /// produced it. Reported only.
  bool early_arrival = false;
  std::string reason;
};

enum class Outcome { kAccept, kReject, kReplayAlarm };

const char* to_string(Outcome o) noexcept;

struct Verdict {
  IdentityVerdict identity;
  TimingVerdict timing;
  bool overall = false;
  Outcome outcome = Outcome::kReject;
};

/// One challenge/response exchange as observed by the verifier.
struct Exchange {
  std::uint64_t challenge_id = 0;
  Seed seed;
  std::int64_t sent_at_ns = 0;
  std::optional<std::int64_t> received_at_ns;
  std::optional<std::uint64_t> echoed_challenge_id;
  std::optional<Fingerprint> response;
  std::string note;  // timeout, decode error, replayed id ...
};

struct ChallengeTranscript {
  DeviceId device;
  std::string anchor_id;
  Point anchor;
  bool paired = false;
  std::vector<Exchange> exchanges;
};

struct ChallengeResult {
  Verdict verdict;
  ChallengeTranscript transcript;
};

struct VerifierOptions {
  /// Reject nearest-neighbour matches farther than the dossier threshold.
  /// Off by default: plain closed-set matching.
  bool open_set = false;
  /// Replaces the dossier threshold when set.
  std::optional<std::uint64_t> threshold_override;
  /// Include other devices' registrations for the same seed in the gallery.
  bool impostor_gallery = true;
  double response_timeout_s = 10.0;
};

/// Identity decision for a response. The gallery is the dossier's runs for
/// the response seed plus, when given, every impostor registration for that
/// seed. With a partner run on the same seed the paired (minimum) rule
/// applies; with a partner on another seed both runs must match the device
/// and the threshold is checked against the better one.
IdentityVerdict verify_identity(const Fingerprint& response, const DeviceDossier& dossier,
                                const Fingerprint* partner, std::optional<std::uint64_t> threshold,
                                std::span<const DeviceDossier> impostors = {});

/// Timing decision for the slowest of the exchanges' round trips.
TimingVerdict verify_timing(std::int64_t rtt_ns, const Point& anchor, const Point& claimed,
                            const TimingPolicy& policy);

struct SeedLogEntry {
  std::uint64_t challenge_id = 0;
  Seed seed;
  DeviceId device;
  bool accepted = false;
};

/// Challenge-issuing side of one verifier anchor. Holds the registry by
/// reference and consumes seeds from its pool. Challenge ids are unique per
/// verifier and remembered, so a response quoting an old id is flagged as a
/// replay.
class Verifier {
 public:
  Verifier(RegistryData& registry, TimingPolicy policy, std::string anchor_id, Point anchor,
           VerifierOptions options = {});

  /// Issues fresh seeds (two distinct ones when `paired`), exchanges them
  /// over `transport` and judges identity and timing. The seeds are consumed
  /// whatever the outcome. Throws kProtocol when the device is unknown or a
  /// response quotes a challenge id this verifier never issued, and
  /// kExhaustion when no enrolled fresh seed is left.
  ChallengeResult run_challenge(DeviceId device, Transport& transport, bool paired = false);

  const std::string& anchor_id() const noexcept { return anchor_id_; }
  const Point& anchor() const noexcept { return anchor_; }
  const TimingPolicy& policy() const noexcept { return policy_; }
  std::vector<SeedLogEntry> seed_log() const;

 private:
  struct Attempt {
    Exchange exchange;
    bool replay = false;
    bool malformed = false;
  };

  Attempt exchange_once(const DeviceDossier& dossier, Transport& transport);

  RegistryData& registry_;
  TimingPolicy policy_;
  std::string anchor_id_;
  Point anchor_;
  VerifierOptions options_;

  mutable std::mutex mu_;
  std::uint64_t next_challenge_id_ = 1;
  std::map<std::uint64_t, Seed> issued_;
  std::vector<SeedLogEntry> log_;
};

}  // namespace gpufp
