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

#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>
#include <thread>

#include "gpufp/protocol.hpp"
#include "gpufp/random.hpp"
#include "gpufp/verifier.hpp"

using namespace gpufp;

namespace {

struct Reply {
  std::int64_t delay_ns = 0;
  std::vector<std::uint8_t> bytes;
};

// Scripted channel: every challenge sent is handed to `respond`, whose reply
// (if any) arrives after its delay on a virtual clock.
class FakeTransport : public Transport {
 public:
  std::function<std::optional<Reply>(const ChallengeMessage&)> respond;
  std::vector<ChallengeMessage> sent;

  std::int64_t now_ns() override { return now_; }
  void send(std::vector<std::uint8_t> payload) override {
    sent.push_back(decode_challenge(payload));
    pending_ = respond(sent.back());
  }
  std::optional<std::vector<std::uint8_t>> receive(std::int64_t deadline_ns) override {
    if (!pending_ || now_ + pending_->delay_ns > deadline_ns) {
      now_ = deadline_ns;
      pending_.reset();
      return std::nullopt;
    }
    now_ += pending_->delay_ns;
    auto out = std::move(pending_->bytes);
    pending_.reset();
    return out;
  }

 private:
  std::int64_t now_ = 1'000'000;
  std::optional<Reply> pending_;
};

struct Fixture {
  SimParams params;
  std::vector<DeviceProfile> profiles;
  RegistryData registry;
  TimingPolicy policy;
  Point anchor{0, 0};
  std::uint64_t nonce = 1000;

  explicit Fixture(std::size_t n_seeds = 6) {
    params.n_sms = 24;
    params.n_rounds = 8;
    params.sync_interval = 4;
    registry.pool = generate_seed_pool(n_seeds, 5);
    for (std::uint64_t d = 0; d < 3; ++d) {
      profiles.push_back(create_device(100 + d, params, DeviceId{d}));
      DeviceDossier dossier;
      dossier.device_id = DeviceId{d};
      dossier.claimed_location = {1000.0 * static_cast<double>(d + 1), 0};
      for (const auto& e : registry.pool.entries()) {
        std::vector<Fingerprint> runs;
        for (std::uint64_t k = 0; k < 3; ++k) runs.push_back(run_fingerprint(profiles[d], e.seed, k, params).fingerprint);
        dossier = enroll(std::move(dossier), registry.pool, e.seed, runs, 0);
      }
      registry.dossiers.push_back(std::move(dossier));
    }
  }

  // Hardware `hw` answering from `at`.
  std::optional<Reply> honest(const ChallengeMessage& ch, std::size_t hw, Point at) {
    const auto run = run_fingerprint(profiles[hw], ch.seed, nonce++, params);
    const double rtt = 2.0 * distance_km(anchor, at) / policy.path_speed + run.simulated_duration;
    return Reply{static_cast<std::int64_t>(std::llround(rtt * 1e9)),
                 encode_response(make_response(ch.challenge_id, run.fingerprint))};
  }

  Verifier verifier(VerifierOptions o = {}) { return Verifier(registry, policy, "anchor-a", anchor, o); }
};

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("honest device is accepted and its seed consumed") {
  Fixture f;
  auto v = f.verifier();
  FakeTransport t;
  t.respond = [&](const ChallengeMessage& ch) { return f.honest(ch, 1, {2000, 0}); };
  const auto r = v.run_challenge(DeviceId{1}, t);
  CHECK(r.verdict.overall);
  CHECK(r.verdict.outcome == Outcome::kAccept);
  CHECK(r.verdict.identity.matched_device == DeviceId{1});
  CHECK(r.verdict.timing.accept);
  CHECK_FALSE(r.verdict.timing.early_arrival);
  REQUIRE(r.transcript.exchanges.size() == 1);
  const auto& ex = r.transcript.exchanges[0];
  CHECK(ex.seed == t.sent[0].seed);
  CHECK(f.registry.pool.state(ex.seed) == SeedState::kConsumed);
  CHECK(f.registry.pool.count(SeedState::kConsumed) == 1);
  const auto log = v.seed_log();
  REQUIRE(log.size() == 1);
  CHECK(log[0].accepted);
  CHECK(log[0].device == DeviceId{1});
}

TEST_CASE("paired challenges use two distinct seeds") {
  Fixture f;
  auto v = f.verifier();
  FakeTransport t;
  t.respond = [&](const ChallengeMessage& ch) { return f.honest(ch, 0, {1000, 0}); };
  const auto r = v.run_challenge(DeviceId{0}, t, true);
  CHECK(r.verdict.overall);
  REQUIRE(t.sent.size() == 2);
  CHECK(t.sent[0].seed != t.sent[1].seed);
  CHECK(t.sent[0].challenge_id != t.sent[1].challenge_id);
  CHECK(f.registry.pool.count(SeedState::kConsumed) == 2);
}

TEST_CASE("another device's hardware is rejected on identity") {
  Fixture f;
  auto v = f.verifier();
  FakeTransport t;
  t.respond = [&](const ChallengeMessage& ch) { return f.honest(ch, 2, {1000, 0}); };
  const auto r = v.run_challenge(DeviceId{0}, t);
  CHECK_FALSE(r.verdict.overall);
  CHECK_FALSE(r.verdict.identity.accept);
  CHECK(r.verdict.identity.matched_device == DeviceId{2});
  CHECK(r.verdict.timing.accept);
}

TEST_CASE("closed-set matching without impostors accepts a foreign device") {
  Fixture f;
  VerifierOptions o;
  o.open_set = false;
  o.impostor_gallery = false;
  auto v = f.verifier(o);
  FakeTransport t;
  t.respond = [&](const ChallengeMessage& ch) { return f.honest(ch, 2, {1000, 0}); };
  CHECK(v.run_challenge(DeviceId{0}, t).verdict.overall);
}

TEST_CASE("threshold override rejects distant matches") {
  Fixture f;
  VerifierOptions o;
  o.threshold_override = 0;
  auto v = f.verifier(o);
  FakeTransport t;
  t.respond = [&](const ChallengeMessage& ch) { return f.honest(ch, 0, {1000, 0}); };
  const auto r = v.run_challenge(DeviceId{0}, t);
  CHECK_FALSE(r.verdict.overall);
  CHECK(r.verdict.identity.threshold == 0u);
  CHECK(r.verdict.identity.reason.find("exceeds threshold") != std::string::npos);
}

TEST_CASE("timeouts and malformed responses are rejections") {
  Fixture f;
  auto v = f.verifier();
  FakeTransport t;
  t.respond = [](const ChallengeMessage&) { return std::optional<Reply>{}; };
  const auto r = v.run_challenge(DeviceId{0}, t);
  CHECK_FALSE(r.verdict.overall);
  CHECK(r.verdict.outcome == Outcome::kReject);
  CHECK(r.verdict.timing.reason == "timeout");
  CHECK(r.transcript.exchanges[0].note == "timeout");
  CHECK(f.registry.pool.count(SeedState::kConsumed) == 1);

  t.respond = [](const ChallengeMessage&) { return std::optional<Reply>{Reply{1000, {1, 0, 2, 0, 5}}}; };
  const auto m = v.run_challenge(DeviceId{0}, t);
  CHECK_FALSE(m.verdict.overall);
  CHECK(m.verdict.identity.reason.find("no valid response") != std::string::npos);
  CHECK(f.registry.pool.count(SeedState::kConsumed) == 2);

  // Right id, wrong shape.
  t.respond = [](const ChallengeMessage& ch) {
    Fingerprint fp{ch.seed, Layout{2, 1}, {0, 1}};
    return std::optional<Reply>{Reply{1000, encode_response(make_response(ch.challenge_id, fp))}};
  };
  const auto l = v.run_challenge(DeviceId{0}, t);
  CHECK_FALSE(l.verdict.overall);
  CHECK(l.verdict.identity.reason.find("layout") != std::string::npos);
}

TEST_CASE("a replayed response raises the replay alarm") {
  Fixture f;
  auto v = f.verifier();
  FakeTransport t;
  std::vector<std::uint8_t> recorded;
  t.respond = [&](const ChallengeMessage& ch) {
    auto r = f.honest(ch, 0, {1000, 0});
    recorded = r->bytes;
    return r;
  };
  CHECK(v.run_challenge(DeviceId{0}, t).verdict.overall);
  t.respond = [&](const ChallengeMessage&) { return std::optional<Reply>{Reply{10, recorded}}; };
  const auto r = v.run_challenge(DeviceId{0}, t);
  CHECK(r.verdict.outcome == Outcome::kReplayAlarm);
  CHECK_FALSE(r.verdict.overall);
  CHECK(std::string(to_string(r.verdict.outcome)) == "replay-alarm");
  CHECK(r.transcript.exchanges[0].echoed_challenge_id == t.sent[0].challenge_id);
  CHECK(f.registry.pool.count(SeedState::kConsumed) == 2);
}

TEST_CASE("protocol errors") {
  Fixture f;
  auto v = f.verifier();
  FakeTransport t;
  t.respond = [&](const ChallengeMessage& ch) {
    auto r = f.honest(ch, 0, {1000, 0});
    r->bytes = encode_response(make_response(ch.challenge_id + 12345, to_fingerprint(decode_response(r->bytes), ch.seed)));
    return r;
  };
  CHECK(kind_of([&] { v.run_challenge(DeviceId{0}, t); }) == ErrorKind::kProtocol);
  CHECK(f.registry.pool.count(SeedState::kConsumed) == 1);
  CHECK(kind_of([&] { v.run_challenge(DeviceId{77}, t); }) == ErrorKind::kProtocol);

  const Fingerprint stray{Seed{1, 2}, f.params.layout(), std::vector<std::uint32_t>(f.params.layout().size())};
  CHECK(kind_of([&] { verify_identity(stray, f.registry.dossiers[0], nullptr, std::nullopt); }) ==
        ErrorKind::kProtocol);
}

TEST_CASE("seed exhaustion") {
  Fixture f(2);
  auto v = f.verifier();
  FakeTransport t;
  t.respond = [&](const ChallengeMessage& ch) { return f.honest(ch, 0, {1000, 0}); };
  v.run_challenge(DeviceId{0}, t);
  v.run_challenge(DeviceId{0}, t);
  CHECK(kind_of([&] { v.run_challenge(DeviceId{0}, t); }) == ErrorKind::kExhaustion);
}

TEST_CASE("anchors number challenges in disjoint ranges") {
  Fixture f;
  Verifier a(f.registry, f.policy, "a", {0, 0});
  Verifier b(f.registry, f.policy, "b", {0, 0});
  FakeTransport ta, tb;
  ta.respond = tb.respond = [&](const ChallengeMessage& ch) { return f.honest(ch, 0, {1000, 0}); };
  a.run_challenge(DeviceId{0}, ta);
  b.run_challenge(DeviceId{0}, tb);
  CHECK(ta.sent[0].challenge_id != tb.sent[0].challenge_id);
}

TEST_CASE("timing boundary") {
  TimingPolicy p;
  const Point anchor{0, 0}, claimed{3000, 4000};
  const double budget = 2.0 * 5000.0 / p.path_speed + p.compute_time_max + p.slack;
  const auto at = [&](std::int64_t ns) { return verify_timing(ns, anchor, claimed, p); };
  const auto inside = static_cast<std::int64_t>(std::floor(budget * 1e9));
  const auto outside = static_cast<std::int64_t>(std::ceil(budget * 1e9)) + 1;
  CHECK(at(inside).accept);
  CHECK_FALSE(at(outside).accept);
  CHECK(at(inside).rtt_budget_s == doctest::Approx(budget));
  CHECK(at(inside).claimed_distance_km == doctest::Approx(5000.0));
  CHECK(at(inside).max_distance_km ==
        doctest::Approx((static_cast<double>(inside) * 1e-9 - p.compute_time_min - p.slack) * p.signal_speed / 2));
  // Too fast for the claimed distance: still accepted, flagged.
  const auto fast = at(static_cast<std::int64_t>(p.compute_time_min * 1e9));
  CHECK(fast.accept);
  CHECK(fast.early_arrival);
  CHECK(fast.max_distance_km == 0.0);
}

TEST_CASE("timing verdicts are monotone in the round trip") {
  Rng rng(44);
  TimingPolicy p;
  for (int i = 0; i < 5000; ++i) {
    const Point anchor{rng.uniform(-5000, 5000), rng.uniform(-5000, 5000)};
    const Point claimed{rng.uniform(-5000, 5000), rng.uniform(-5000, 5000)};
    const auto a = static_cast<std::int64_t>(rng.uniform(2.8e9, 3.0e9));
    const auto b = a + static_cast<std::int64_t>(rng.below(50'000'000));
    if (!verify_timing(a, anchor, claimed, p).accept) CHECK_FALSE(verify_timing(b, anchor, claimed, p).accept);
    CHECK(verify_timing(a, anchor, claimed, p).max_distance_km <= verify_timing(b, anchor, claimed, p).max_distance_km);
  }
}

TEST_CASE("paired identity distance never exceeds either single distance") {
  Fixture f;
  Rng rng(3);
  const auto seeds = f.registry.pool.entries();
  for (int i = 0; i < 200; ++i) {
    const std::size_t hw = rng.below(3);
    const DeviceDossier& dossier = f.registry.dossiers[rng.below(3)];
    const Seed s1 = seeds[rng.below(seeds.size())].seed;
    const Seed s2 = rng.below(2) ? s1 : seeds[rng.below(seeds.size())].seed;
    const auto a = run_fingerprint(f.profiles[hw], s1, rng.next(), f.params).fingerprint;
    const auto b = run_fingerprint(f.profiles[hw], s2, rng.next(), f.params).fingerprint;
    const auto sa = verify_identity(a, dossier, nullptr, std::nullopt, f.registry.dossiers);
    const auto sb = verify_identity(b, dossier, nullptr, std::nullopt, f.registry.dossiers);
    const auto p = verify_identity(a, dossier, &b, std::nullopt, f.registry.dossiers);
    if (s1 == s2) {
      // Same seed: one gallery, so the minimum rule applies directly.
      CHECK(p.distance <= sa.distance);
      CHECK(p.distance <= sb.distance);
    } else if (p.accept) {
      CHECK(sa.accept);
      CHECK(sb.accept);
      CHECK(p.distance == std::min(sa.distance, sb.distance));
    }
  }
}

TEST_CASE("no seed is ever used twice, whatever the responses") {
  Fixture f(40);
  auto v = f.verifier();
  FakeTransport t;
  Rng rng(8);
  std::vector<std::vector<std::uint8_t>> seen;
  t.respond = [&](const ChallengeMessage& ch) -> std::optional<Reply> {
    switch (rng.below(4)) {
      case 0: return std::nullopt;
      case 1:
        if (!seen.empty()) return Reply{5, seen[rng.below(seen.size())]};
        [[fallthrough]];
      default: {
        auto r = f.honest(ch, 0, {1000, 0});
        seen.push_back(r->bytes);
        return r;
      }
    }
  };
  for (int i = 0; i < 20; ++i) v.run_challenge(DeviceId{0}, t, i % 3 == 0);
  const auto log = v.seed_log();
  std::set<Seed> used;
  for (const auto& e : log) {
    CHECK(used.insert(e.seed).second);
    CHECK(f.registry.pool.state(e.seed) == SeedState::kConsumed);
  }
  CHECK(used.size() == f.registry.pool.count(SeedState::kConsumed));
}

TEST_CASE("concurrent challenges keep their own state") {
  Fixture f(64);
  auto v = f.verifier();
  std::vector<int> accepted(4, 0);
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w) {
    threads.emplace_back([&, w] {
      FakeTransport t;
      std::uint64_t nonce = 5000 + 100 * static_cast<std::uint64_t>(w);
      const std::size_t device = static_cast<std::size_t>(w % 3);
      t.respond = [&](const ChallengeMessage& ch) {
        const auto run = run_fingerprint(f.profiles[device], ch.seed, nonce++, f.params);
        const double rtt = 2.0 * distance_km(f.anchor, f.registry.dossiers[device].claimed_location) /
                               f.policy.path_speed + run.simulated_duration;
        return std::optional<Reply>{Reply{static_cast<std::int64_t>(std::llround(rtt * 1e9)),
                                          encode_response(make_response(ch.challenge_id, run.fingerprint))}};
      };
      for (int i = 0; i < 10; ++i) accepted[w] += v.run_challenge(DeviceId{device}, t).verdict.overall;
    });
  }
  for (auto& th : threads) th.join();
  for (int a : accepted) CHECK(a == 10);
  std::set<std::uint64_t> ids;
  std::set<Seed> seeds;
  for (const auto& e : v.seed_log()) {
    ids.insert(e.challenge_id);
    seeds.insert(e.seed);
  }
  CHECK(ids.size() == 40);
  CHECK(seeds.size() == 40);
}
