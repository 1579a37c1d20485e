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
#include <optional>

#include "gpufp/harness.hpp"
#include "gpufp/netsim.hpp"
#include "gpufp/protocol.hpp"

using namespace gpufp;

namespace {

ToolConfig small_config() {
  ToolConfig c;
  c.experiment.sim.n_sms = 32;
  c.experiment.sim.n_rounds = 16;
  return c;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kIo;
}

ScenarioReport play(const std::string& name, std::uint64_t seed, std::uint32_t trials,
                    std::optional<bool> open_set = std::nullopt) {
  auto setup = builtin_scenario(name, seed, trials, small_config());
  if (open_set) setup.options.open_set = *open_set;
  return run_scenario(setup.scenario, setup.registry, setup.policy, setup.options);
}

const char* kMinimal = R"({
  "format": "gpufp-scenario", "version": 1, "name": "mini", "rng_seed": 3,
  "nodes": [
    {"id": "a", "role": "verifier-anchor", "position": [0, 0]},
    {"id": "d", "role": "honest-device", "position": [100, 0], "device": 0}
  ],
  "script": [{"action": "challenge", "node": "d", "repeat": 2}]
})";

}  // namespace

TEST_CASE("event queue runs in time then scheduling order") {
  EventQueue q;
  std::vector<int> order;
  q.schedule_at(20, [&] { order.push_back(3); });
  q.schedule_at(10, [&] { order.push_back(1); });
  q.schedule_at(10, [&] { order.push_back(2); });
  q.schedule_at(20, [&] { order.push_back(4); });
  CHECK(q.pending() == 4);
  CHECK(q.next_time() == 10);
  while (q.step()) {
  }
  CHECK(order == std::vector<int>{1, 2, 3, 4});
  CHECK(q.now_ns() == 20);
  CHECK_FALSE(q.next_time().has_value());
  CHECK(kind_of([&] { q.schedule_at(5, [] {}); }) == ErrorKind::kParameter);
  q.schedule_in(5, [&] { order.push_back(5); });
  CHECK(kind_of([&] { q.advance_to(100); }) == ErrorKind::kParameter);
  q.step();
  q.advance_to(100);
  CHECK(q.now_ns() == 100);
}

TEST_CASE("events scheduled from events keep their order") {
  EventQueue q;
  std::vector<int> order;
  q.schedule_at(0, [&] {
    order.push_back(0);
    q.schedule_in(0, [&] { order.push_back(2); });
  });
  q.schedule_at(0, [&] { order.push_back(1); });
  while (q.step()) {
  }
  CHECK(order == std::vector<int>{0, 1, 2});
}

TEST_CASE("transmit is propagation plus bounded processing") {
  const SimNode a{"a", {0, 0}, NodeRole::kVerifierAnchor, std::nullopt};
  const SimNode b{"b", {3000, 4000}, NodeRole::kVerifierAnchor, std::nullopt};
  LinkModel still;
  still.processing_jitter = 0.0;
  Rng rng(1);
  const auto d = transmit(a, b, {1, 2, 3}, still, rng);
  CHECK(d.offset_s == 5000.0 / still.signal_speed);
  CHECK(d.payload == std::vector<std::uint8_t>{1, 2, 3});

  LinkModel noisy;
  noisy.processing_jitter = 0.001;
  for (int i = 0; i < 1000; ++i) {
    const double t = transmit(a, b, {}, noisy, rng).offset_s - 5000.0 / noisy.signal_speed;
    CHECK(t >= 0.0);
    CHECK(t <= 0.002 + 1e-12);
  }

  LinkModel lossy;
  lossy.drop_probability = 1.0;
  CHECK(kind_of([&] { transmit(a, b, {}, lossy, rng); }) == ErrorKind::kDelivery);

  LinkModel bad;
  bad.signal_speed = kSpeedOfLight * 2;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = LinkModel{};
  bad.drop_probability = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("honest rounds are accepted and physically timed") {
  const auto cfg = small_config();
  auto setup = builtin_scenario("honest", 9, 12, cfg);
  const auto report = run_scenario(setup.scenario, setup.registry, setup.policy);
  CHECK(report.count(false) == 12);
  CHECK(report.accepted(false) == 12);
  CHECK(report.count(true) == 0);
  CHECK(report.entries.size() == 36);
  const auto& sim = cfg.experiment.sim;
  for (const auto& e : report.entries) {
    REQUIRE(e.result.has_value());
    const auto& ex = e.result->transcript.exchanges.at(0);
    const Point device = setup.registry.find(e.device)->claimed_location;
    const double floor_s = 2.0 * distance_km(e.result->transcript.anchor, device) / cfg.link.signal_speed +
                           sim.compute_time_mean - sim.compute_time_jitter;
    CHECK(static_cast<double>(*ex.received_at_ns - ex.sent_at_ns) >= std::floor(floor_s * 1e9));
  }
  for (const auto& r : report.rounds) {
    CHECK_FALSE(r.empty);
    CHECK(r.claimed_inside);
    CHECK(r.n_bounds == 3);
  }
}

TEST_CASE("scenarios are reproducible") {
  const auto a = play("replay", 5, 8);
  const auto b = play("replay", 5, 8);
  CHECK(report_jsonl(a) == report_jsonl(b));
  CHECK(report_csv(a) == report_csv(b));
  const auto c = play("replay", 6, 8);
  CHECK(report_jsonl(a) != report_jsonl(c));
  CHECK(c.count(true) == a.count(true));
  CHECK(c.accepted(true) == 0);
}

TEST_CASE("attacks are detected") {
  for (const auto& name : builtin_scenario_names()) {
    if (name == "honest") continue;
    CAPTURE(name);
    const auto r = play(name, 21, 8);
    CHECK(r.count(true) == 8);
    CHECK(r.accepted(true) == 0);
    CHECK(r.accepted(false) == r.count(false));
    if (name == "replay-rewrite") CHECK(r.replay_alarms(true) == 0);
  }
}

TEST_CASE("closed-set matching cannot see decoys or rewritten replays") {
  // The response still lands nearest to the only registration for its seed;
  // only the distance threshold exposes it.
  CHECK(play("decoy", 4, 8, false).accepted(true) == 8);
  CHECK(play("decoy", 4, 8).accepted(true) == 0);
  CHECK(play("replay-rewrite", 4, 8, false).accepted(true) == 8);
  CHECK(play("replay-rewrite", 4, 8).accepted(true) == 0);
}

TEST_CASE("report formats") {
  const auto r = play("relocation", 2, 4);
  const auto csv = report_csv(r);
  CHECK(csv.rfind("scenario,label,challenges,accepted,rejected,replay_alarms,errors\n", 0) == 0);
  CHECK(csv.find("relocation,attack,4,0,4,0,0") != std::string::npos);
  const auto jsonl = report_jsonl(r);
  const auto lines = std::count(jsonl.begin(), jsonl.end(), '\n');
  CHECK(static_cast<std::size_t>(lines) == r.entries.size() + r.rounds.size());
}

TEST_CASE("scenario JSON parsing") {
  EnrollmentPlan plan;
  plan.n_devices = 1;
  plan.seeds_per_device = 4;
  plan.sim.n_sms = 16;
  plan.sim.n_rounds = 8;
  auto [fleet, registry] = build_enrolled_fleet(plan);

  const auto sc = parse_scenario(kMinimal, fleet);
  CHECK(sc.name == "mini");
  CHECK(sc.rng_seed == 3);
  REQUIRE(sc.nodes.size() == 2);
  CHECK(sc.nodes[1].profile->device_id() == DeviceId{0});
  REQUIRE(sc.script.size() == 1);
  CHECK(sc.script[0].repeat == 2);

  const auto again = parse_scenario(scenario_to_json(sc), fleet);
  CHECK(scenario_to_json(again) == scenario_to_json(sc));
  CHECK(again.nodes[1].position == sc.nodes[1].position);

  auto broken = [&](const std::string& from, const std::string& to) {
    std::string text = kMinimal;
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    return kind_of([&] { parse_scenario(text, fleet); });
  };
  CHECK(broken("\"name\"", "\"nmae\"") == ErrorKind::kScenario);
  CHECK(broken("\"device\": 0", "\"device\": 9") == ErrorKind::kScenario);
  CHECK(broken("\"node\": \"d\"", "\"node\": \"zz\"") == ErrorKind::kScenario);
  CHECK(broken("\"node\": \"d\"", "\"node\": \"a\"") == ErrorKind::kScenario);
  CHECK(broken("\"challenge\"", "\"teleport\"") == ErrorKind::kScenario);
  CHECK(broken("\"repeat\": 2", "\"repeat\": 0") == ErrorKind::kScenario);
  CHECK(broken("[100, 0]", "[100]") == ErrorKind::kScenario);
  CHECK(broken("honest-device", "bystander") == ErrorKind::kScenario);
  CHECK(broken("\"version\": 1", "\"version\": 2") == ErrorKind::kScenario);
  CHECK(broken("{\"id\": \"d\"", "{\"id\": \"a\"") == ErrorKind::kScenario);
  CHECK(kind_of([&] { parse_scenario("{", fleet); }) == ErrorKind::kScenario);

  const auto report = run_scenario(sc, registry, TimingPolicy{});
  CHECK(report.count(false) == 2);
  CHECK(report.accepted(false) == 2);
}

TEST_CASE("shipped example scenarios load and play") {
  EnrollmentPlan plan;
  plan.sim.n_sms = 32;
  plan.sim.n_rounds = 16;
  for (const char* name : {"honest", "replay", "relocate"}) {
    CAPTURE(name);
    auto [fleet, registry] = build_enrolled_fleet(plan);
    const auto sc = load_scenario(std::string(GPUFP_SCENARIO_DIR) + "/" + name + ".json", fleet);
    CHECK(sc.name == name);
    const auto r = run_scenario(sc, registry, TimingPolicy{});
    CHECK(r.count(false) + r.count(true) == r.rounds.size());
    CHECK(r.accepted(false) == r.count(false));
    CHECK(r.accepted(true) == 0);
    if (std::string(name) != "honest") CHECK(r.count(true) > 0);
  }
}
