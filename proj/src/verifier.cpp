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

#include "gpufp/verifier.hpp"

#include <algorithm>
#include <cmath>

#include "gpufp/protocol.hpp"

namespace gpufp {

const char* to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::kAccept: return "accept";
    case Outcome::kReject: return "reject";
    case Outcome::kReplayAlarm: return "replay-alarm";
  }
  return "unknown";
}

namespace {

std::vector<GalleryEntry> gallery_for(const Seed& seed, const DeviceDossier& dossier,
                                      std::span<const DeviceDossier> impostors) {
  const RegistrationRecord* rec = dossier.record(seed);
  if (rec == nullptr) {
    fail(ErrorKind::kProtocol, to_string(dossier.device_id) + " has no registration for seed " + to_hex(seed));
  }
  std::vector<GalleryEntry> gallery;
  for (std::size_t i = 0; i < rec->fingerprints.size(); ++i) {
    gallery.push_back({dossier.device_id, static_cast<std::uint32_t>(i), &rec->fingerprints[i]});
  }
  for (const auto& other : impostors) {
    if (other.device_id == dossier.device_id) continue;
    const RegistrationRecord* r = other.record(seed);
    if (r == nullptr) continue;
    for (std::size_t i = 0; i < r->fingerprints.size(); ++i) {
      gallery.push_back({other.device_id, static_cast<std::uint32_t>(i), &r->fingerprints[i]});
    }
  }
  return gallery;
}

}  // namespace

IdentityVerdict verify_identity(const Fingerprint& response, const DeviceDossier& dossier,
                                const Fingerprint* partner, std::optional<std::uint64_t> threshold,
                                std::span<const DeviceDossier> impostors) {
  const DeviceId expected = dossier.device_id;
  IdentityVerdict v;
  v.threshold = threshold;

  const auto gallery = gallery_for(response.seed, dossier, impostors);
  MatchResult m;
  if (partner == nullptr) {
    m = reidentify(response, expected, gallery);
  } else if (partner->seed == response.seed) {
    m = reidentify_paired(response, *partner, expected, gallery);
  } else {
    const auto gallery2 = gallery_for(partner->seed, dossier, impostors);
    const MatchResult m1 = reidentify(response, expected, gallery);
    const MatchResult m2 = reidentify(*partner, expected, gallery2);
    if (!m1.correct) m = m1;
    else if (!m2.correct) m = m2;
    else m = m1.matched_distance <= m2.matched_distance ? m1 : m2;
  }

  v.matched_device = m.matched_device;
  v.distance = m.matched_distance;
  if (!m.correct) {
    v.reason = "nearest registration belongs to " + to_string(m.matched_device);
    return v;
  }
  if (threshold && m.matched_distance > *threshold) {
    v.reason = "distance " + std::to_string(m.matched_distance) + " exceeds threshold " +
               std::to_string(*threshold);
    return v;
  }
  v.accept = true;
  return v;
}

TimingVerdict verify_timing(std::int64_t rtt_ns, const Point& anchor, const Point& claimed,
                            const TimingPolicy& policy) {
  policy.validate();
  TimingVerdict v;
  v.rtt_ns = rtt_ns;
  const double rtt_s = static_cast<double>(rtt_ns) * 1e-9;
  v.max_distance_km = bound_distance(std::max(rtt_s, 0.0), policy).max_distance_km;
  v.claimed_distance_km = distance_km(anchor, claimed);
  v.rtt_budget_s = 2.0 * v.claimed_distance_km / policy.path_speed + policy.compute_time_max + policy.slack;
  v.early_arrival = v.max_distance_km < v.claimed_distance_km;
  v.accept = rtt_s <= v.rtt_budget_s;
  if (!v.accept) {
    v.reason = "round trip " + std::to_string(rtt_s) + " s exceeds budget " + std::to_string(v.rtt_budget_s) + " s";
  }
  return v;
}

Verifier::Verifier(RegistryData& registry, TimingPolicy policy, std::string anchor_id, Point anchor,
                   VerifierOptions options)
    : registry_(registry),
      policy_(policy),
      anchor_id_(std::move(anchor_id)),
      anchor_(anchor),
      options_(options) {
  policy_.validate();
  if (!(options_.response_timeout_s > 0.0)) fail(ErrorKind::kParameter, "response timeout must be > 0");
  // Anchors number their challenges in disjoint ranges (FNV-1a of the id).
  std::uint32_t h = 2166136261u;
  for (unsigned char c : anchor_id_) h = (h ^ c) * 16777619u;
  next_challenge_id_ = (static_cast<std::uint64_t>(h) << 32) | 1u;
}

std::vector<SeedLogEntry> Verifier::seed_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

Verifier::Attempt Verifier::exchange_once(const DeviceDossier& dossier, Transport& transport) {
  const Seed seed = registry_.pool.issue([&](const Seed& s) { return dossier.record(s) != nullptr; });
  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    id = next_challenge_id_++;
    issued_.emplace(id, seed);
  }

  Attempt a;
  a.exchange.challenge_id = id;
  a.exchange.seed = seed;
  a.exchange.sent_at_ns = transport.now_ns();
  transport.send(encode_challenge(ChallengeMessage{kProtocolVersion, id, seed, a.exchange.sent_at_ns}));

  const auto deadline =
      a.exchange.sent_at_ns + static_cast<std::int64_t>(std::llround(options_.response_timeout_s * 1e9));
  auto bytes = transport.receive(deadline);
  if (!bytes) {
    a.exchange.note = "timeout";
  } else {
    a.exchange.received_at_ns = transport.now_ns();
    try {
      ResponseMessage resp = decode_response(*bytes);
      a.exchange.echoed_challenge_id = resp.challenge_id;
      if (resp.challenge_id == id) {
        a.exchange.response = to_fingerprint(resp, seed);
      } else {
        bool known;
        {
          std::lock_guard lock(mu_);
          known = issued_.count(resp.challenge_id) != 0;
        }
        if (!known) {
          registry_.pool.consume(seed);
          fail(ErrorKind::kProtocol, "response quotes unknown challenge id " + std::to_string(resp.challenge_id));
        }
        a.replay = true;
        a.exchange.note = "response quotes earlier challenge " + std::to_string(resp.challenge_id);
      }
    } catch (const DecodeError& e) {
      a.malformed = true;
      a.exchange.note = e.what();
    }
  }
  registry_.pool.consume(seed);
  return a;
}

ChallengeResult Verifier::run_challenge(DeviceId device, Transport& transport, bool paired) {
  const DeviceDossier* dossier = registry_.find(device);
  if (dossier == nullptr) fail(ErrorKind::kProtocol, "no dossier for " + to_string(device));

  std::vector<Attempt> attempts;
  attempts.push_back(exchange_once(*dossier, transport));
  if (paired) attempts.push_back(exchange_once(*dossier, transport));

  ChallengeResult out;
  out.transcript.device = device;
  out.transcript.anchor_id = anchor_id_;
  out.transcript.anchor = anchor_;
  out.transcript.paired = paired;
  for (const auto& a : attempts) out.transcript.exchanges.push_back(a.exchange);

  Verdict& v = out.verdict;
  std::int64_t rtt = 0;
  for (const auto& a : attempts) {
    const auto end = a.exchange.received_at_ns.value_or(transport.now_ns());
    rtt = std::max(rtt, end - a.exchange.sent_at_ns);
  }
  v.timing = verify_timing(rtt, anchor_, dossier->claimed_location, policy_);

  const auto replay = std::find_if(attempts.begin(), attempts.end(), [](const Attempt& a) { return a.replay; });
  const auto broken = std::find_if(attempts.begin(), attempts.end(),
                                   [](const Attempt& a) { return !a.exchange.response.has_value(); });
  const Layout expected_layout = dossier->records.empty()
                                     ? Layout{}
                                     : dossier->records.begin()->second.fingerprints.front().layout;
  const auto bad_layout = std::find_if(attempts.begin(), attempts.end(), [&](const Attempt& a) {
    return a.exchange.response && a.exchange.response->layout != expected_layout;
  });

  if (replay != attempts.end()) {
    v.outcome = Outcome::kReplayAlarm;
    v.identity.reason = "replayed response: " + replay->exchange.note;
  } else if (broken != attempts.end()) {
    v.identity.reason = "no valid response: " + broken->exchange.note;
    if (broken->exchange.note == "timeout") {
      v.timing.accept = false;
      v.timing.reason = "timeout";
    }
  } else if (bad_layout != attempts.end()) {
    v.identity.reason = "response layout does not match the registration";
  } else {
    std::optional<std::uint64_t> threshold;
    if (options_.threshold_override) threshold = options_.threshold_override;
    else if (options_.open_set) threshold = dossier->identity_threshold;
    std::span<const DeviceDossier> impostors;
    if (options_.impostor_gallery) impostors = registry_.dossiers;
    const Fingerprint* partner = paired ? &*attempts[1].exchange.response : nullptr;
    v.identity = verify_identity(*attempts[0].exchange.response, *dossier, partner, threshold, impostors);
  }

  v.overall = v.outcome != Outcome::kReplayAlarm && v.identity.accept && v.timing.accept;
  if (v.outcome != Outcome::kReplayAlarm) v.outcome = v.overall ? Outcome::kAccept : Outcome::kReject;

  {
    std::lock_guard lock(mu_);
    for (const auto& a : attempts) log_.push_back({a.exchange.challenge_id, a.exchange.seed, device, v.overall});
  }
  return out;
}

}  // namespace gpufp
