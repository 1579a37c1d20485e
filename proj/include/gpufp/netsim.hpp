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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "gpufp/common.hpp"
#include "gpufp/device_model.hpp"
#include "gpufp/geoloc.hpp"
#include "gpufp/random.hpp"
#include "gpufp/registry.hpp"
#include "gpufp/verifier.hpp"

namespace gpufp {

struct LinkModel {
  double signal_speed = kFiberSpeed;  // km/s
  /// Per-hop processing delay is uniform on [0, 2 * processing_jitter] s.
  double processing_jitter = 0.0001;
  double drop_probability = 0.0;

  void validate() const;
};

enum class NodeRole { kVerifierAnchor, kHonestDevice, kAdversaryDevice };

const char* to_string(NodeRole r) noexcept;
NodeRole node_role_from_string(const std::string& s);

struct SimNode {
  std::string node_id;
  Point position;
  NodeRole role = NodeRole::kHonestDevice;
  std::optional<DeviceProfile> profile;
};

struct Delivery {
  double offset_s = 0.0;
  std::vector<std::uint8_t> payload;
};

/// Propagation plus processing delay for one hop. Throws kDelivery when the
/// message is dropped. Always draws two uniforms from `rng`.
Delivery transmit(const SimNode& from, const SimNode& to, std::vector<std::uint8_t> payload,
                  const LinkModel& link, Rng& rng);

/// Discrete-event queue on a virtual nanosecond clock. Events at equal times
/// run in scheduling order.
class EventQueue {
 public:
  using Action = std::function<void()>;

  std::int64_t now_ns() const noexcept { return now_; }
  void schedule_at(std::int64_t t_ns, Action action);
  void schedule_in(std::int64_t dt_ns, Action action) { schedule_at(now_ + dt_ns, std::move(action)); }
  std::optional<std::int64_t> next_time() const;
  /// Runs the earliest event. False when the queue is empty.
  bool step();
  /// Moves the clock forward; events before `t_ns` must have run.
  void advance_to(std::int64_t t_ns);
  std::size_t pending() const noexcept { return queue_.size(); }

 private:
  struct Item {
    std::int64_t t;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };

  std::int64_t now_ = 0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
};

/// Scripted adversary steps. `challenge` is the driver: every verifier
/// anchor challenges `node` once per repeat.
struct ScriptAction {
  enum class Kind { kChallenge, kRecord, kReplay, kDecoy, kRelocate, kShrink, kRestore };
  Kind kind = Kind::kChallenge;
  std::string node;
  std::string decoy;        // kDecoy
  double dx = 0.0;          // kRelocate, km
  double dy = 0.0;
  /// kShrink: the adversary answers after max(0, t_floor - (1 - factor) * t_max)
  /// where t_floor and t_max are the fastest and slowest honest compute times.
  double factor = 1.0;
  bool rewrite_id = false;  // kReplay
  bool paired = false;      // kChallenge
  std::uint32_t repeat = 1; // kChallenge
};

const char* to_string(ScriptAction::Kind k) noexcept;

struct Scenario {
  std::string name;
  std::uint64_t rng_seed = 1;
  LinkModel link;
  SimParams params;
  std::vector<SimNode> nodes;
  std::vector<ScriptAction> script;
};

/// Parses the JSON scenario format (docs/scenarios.md). Device nodes name a
/// fleet device by id; their profiles are taken from `fleet`. Throws
/// kScenario on malformed input or dangling references.
Scenario parse_scenario(const std::string& json_text, const FleetData& fleet);
Scenario load_scenario(const std::string& path, const FleetData& fleet);
std::string scenario_to_json(const Scenario& scenario);

/// Adversary modifications active on one device node.
struct AdversaryState {
  bool recording = false;
  std::optional<std::vector<std::uint8_t>> recorded;
  bool replay = false;
  bool rewrite_id = false;
  std::optional<std::string> decoy;
  std::optional<double> shrink;
  bool relocated = false;

  bool active() const noexcept { return replay || decoy || shrink || relocated; }
  std::vector<std::string> labels() const;
};

/// Nodes, links and device behaviour wired onto an event queue.
class Network {
 public:
  Network(std::vector<SimNode> nodes, LinkModel link, SimParams params, std::uint64_t rng_seed);

  EventQueue& events() noexcept { return events_; }
  const SimNode& node(const std::string& id) const;
  SimNode& node(const std::string& id);
  const std::vector<SimNode>& nodes() const noexcept { return nodes_; }
  AdversaryState& adversary(const std::string& device_node);

  void relocate(const std::string& device_node, double dx, double dy);
  /// Clears adversary state and returns the node to its initial position.
  void restore(const std::string& device_node);

  /// Transport from `anchor` to the device behind `device_node`.
  std::unique_ptr<Transport> open_channel(const std::string& anchor, const std::string& device_node);

  std::uint64_t dropped() const noexcept { return dropped_; }

 private:
  friend class NetsimTransport;

  struct Inbox {
    std::vector<std::vector<std::uint8_t>> messages;
  };

  void deliver_challenge(const std::string& anchor, const std::string& device_node,
                         std::vector<std::uint8_t> bytes, std::shared_ptr<Inbox> inbox);
  void on_challenge(const std::string& anchor, const std::string& device_node, const std::string& responder,
                    std::vector<std::uint8_t> bytes, std::shared_ptr<Inbox> inbox);
  void send_back(const std::string& responder, const std::string& anchor, std::vector<std::uint8_t> bytes,
                 std::shared_ptr<Inbox> inbox);

  EventQueue events_;
  std::vector<SimNode> nodes_;
  std::vector<Point> home_;
  LinkModel link_;
  SimParams params_;
  Rng rng_;
  std::map<std::string, AdversaryState> adversaries_;
  std::uint64_t dropped_ = 0;
};

struct ChallengeReportEntry {
  std::size_t step = 0;
  std::string anchor_id;
  std::string node;
  DeviceId device;
  bool attack = false;
  std::vector<std::string> attacks;
  std::optional<ChallengeResult> result;
  std::string error;  // set when the verifier raised a protocol error

  /// Rejected, alarmed or errored.
  bool detected() const noexcept { return !result || !result->verdict.overall; }
};

/// One challenge round: every anchor challenged the node once. The round is
/// accepted only if every anchor accepted. The feasible region is built from
/// every anchor's bound.
struct RoundReport {
  std::size_t step = 0;
  std::string node;
  bool attack = false;
  bool accepted = false;
  bool replay_alarm = false;
  bool error = false;
  std::size_t n_bounds = 0;
  bool empty = true;
  double diameter_km = 0.0;
  Point claimed;
  Point responder;  // where the answering hardware actually sits
  bool claimed_inside = false;
  bool responder_inside = false;
};

struct ScenarioReport {
  std::string name;
  std::uint64_t rng_seed = 0;
  std::vector<ChallengeReportEntry> entries;
  std::vector<RoundReport> rounds;

  // Round counts.
  std::size_t count(bool attack) const;
  std::size_t accepted(bool attack) const;
  std::size_t replay_alarms(bool attack) const;
  std::size_t errors(bool attack) const;
};

/// Plays the script against `registry`, consuming its seeds. One verifier
/// session per anchor lives for the whole scenario.
ScenarioReport run_scenario(const Scenario& scenario, RegistryData& registry, const TimingPolicy& policy,
                            const VerifierOptions& options = {});

/// One JSON object per challenge, then one per round.
std::string report_jsonl(const ScenarioReport& report);
/// Header `scenario,label,challenges,accepted,rejected,replay_alarms,errors`
/// and one row per label present, counting rounds.
std::string report_csv(const ScenarioReport& report, bool header = true);

}  // namespace gpufp
