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

#include "gpufp/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gpufp/protocol.hpp"

namespace gpufp {

using nlohmann::json;

void LinkModel::validate() const {
  if (!(std::isfinite(signal_speed) && signal_speed > 0.0 && signal_speed <= kSpeedOfLight)) {
    fail(ErrorKind::kParameter, "link signal_speed must lie in (0, c]");
  }
  if (!(std::isfinite(processing_jitter) && processing_jitter >= 0.0)) {
    fail(ErrorKind::kParameter, "link processing_jitter must be >= 0");
  }
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
    fail(ErrorKind::kParameter, "link drop_probability must lie in [0, 1]");
  }
}

const char* to_string(NodeRole r) noexcept {
  switch (r) {
    case NodeRole::kVerifierAnchor: return "verifier-anchor";
    case NodeRole::kHonestDevice: return "honest-device";
    case NodeRole::kAdversaryDevice: return "adversary-device";
  }
  return "unknown";
}

NodeRole node_role_from_string(const std::string& s) {
  if (s == "verifier-anchor") return NodeRole::kVerifierAnchor;
  if (s == "honest-device") return NodeRole::kHonestDevice;
  if (s == "adversary-device") return NodeRole::kAdversaryDevice;
  fail(ErrorKind::kScenario, "unknown node role '" + s + "'");
}

Delivery transmit(const SimNode& from, const SimNode& to, std::vector<std::uint8_t> payload,
                  const LinkModel& link, Rng& rng) {
  const double drop = rng.uniform();
  const double jitter = rng.uniform() * 2.0 * link.processing_jitter;
  if (drop < link.drop_probability) {
    fail(ErrorKind::kDelivery, "message from " + from.node_id + " to " + to.node_id + " dropped");
  }
  return Delivery{distance_km(from.position, to.position) / link.signal_speed + jitter, std::move(payload)};
}

namespace {

std::int64_t to_ns(double seconds) { return static_cast<std::int64_t>(std::ceil(seconds * 1e9)); }

}  // namespace

void EventQueue::schedule_at(std::int64_t t_ns, Action action) {
  if (t_ns < now_) fail(ErrorKind::kParameter, "cannot schedule an event in the past");
  queue_.push(Item{t_ns, seq_++, std::move(action)});
}

std::optional<std::int64_t> EventQueue::next_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().t;
}

bool EventQueue::step() {
  if (queue_.empty()) return false;
  Item item = queue_.top();
  queue_.pop();
  now_ = item.t;
  item.action();
  return true;
}

void EventQueue::advance_to(std::int64_t t_ns) {
  if (!queue_.empty() && queue_.top().t < t_ns) fail(ErrorKind::kParameter, "advance_to skips pending events");
  now_ = std::max(now_, t_ns);
}

const char* to_string(ScriptAction::Kind k) noexcept {
  switch (k) {
    case ScriptAction::Kind::kChallenge: return "challenge";
    case ScriptAction::Kind::kRecord: return "record";
    case ScriptAction::Kind::kReplay: return "replay";
    case ScriptAction::Kind::kDecoy: return "decoy";
    case ScriptAction::Kind::kRelocate: return "relocate";
    case ScriptAction::Kind::kShrink: return "shrink";
    case ScriptAction::Kind::kRestore: return "restore";
  }
  return "unknown";
}

std::vector<std::string> AdversaryState::labels() const {
  std::vector<std::string> out;
  if (replay) out.push_back(rewrite_id ? "replay-rewrite" : "replay");
  if (decoy) out.push_back("decoy");
  if (relocated) out.push_back("relocation");
  if (shrink) out.push_back("fast-compute");
  return out;
}

// Scenario parsing ----------------------------------------------------------

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(ErrorKind::kScenario, where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kScenario, where + ": '" + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end()) {
      fail(ErrorKind::kScenario, where + ": unknown key '" + k + "'");
    }
  }
}

ScriptAction::Kind action_kind(const std::string& s, const std::string& where) {
  for (auto k : {ScriptAction::Kind::kChallenge, ScriptAction::Kind::kRecord, ScriptAction::Kind::kReplay,
                 ScriptAction::Kind::kDecoy, ScriptAction::Kind::kRelocate, ScriptAction::Kind::kShrink,
                 ScriptAction::Kind::kRestore}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::kScenario, where + ": unknown action '" + s + "'");
}

}  // namespace

Scenario parse_scenario(const std::string& json_text, const FleetData& fleet) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kScenario, std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) fail(ErrorKind::kScenario, "scenario must be a JSON object");
  reject_unknown_keys(root, {"format", "version", "name", "rng_seed", "link", "nodes", "script"}, "scenario");
  if (field_or<std::string>(root, "format", "gpufp-scenario", "scenario") != "gpufp-scenario") {
    fail(ErrorKind::kScenario, "scenario format must be 'gpufp-scenario'");
  }
  if (field_or<int>(root, "version", 1, "scenario") != 1) fail(ErrorKind::kScenario, "unsupported scenario version");

  Scenario sc;
  sc.name = field_or<std::string>(root, "name", "scenario", "scenario");
  sc.rng_seed = field_or<std::uint64_t>(root, "rng_seed", 1, "scenario");
  sc.params = fleet.params;
  if (root.contains("link")) {
    const json& l = root["link"];
    if (!l.is_object()) fail(ErrorKind::kScenario, "link must be an object");
    reject_unknown_keys(l, {"signal_speed", "processing_jitter", "drop_probability"}, "link");
    sc.link.signal_speed = field_or<double>(l, "signal_speed", sc.link.signal_speed, "link");
    sc.link.processing_jitter = field_or<double>(l, "processing_jitter", sc.link.processing_jitter, "link");
    sc.link.drop_probability = field_or<double>(l, "drop_probability", sc.link.drop_probability, "link");
  }
  try {
    sc.link.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kScenario, e.what());
  }

  const json nodes = field<json>(root, "nodes", "scenario");
  if (!nodes.is_array()) fail(ErrorKind::kScenario, "nodes must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& n = nodes[i];
    const std::string where = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object()) fail(ErrorKind::kScenario, where + " must be an object");
    reject_unknown_keys(n, {"id", "role", "position", "device"}, where);
    SimNode node;
    node.node_id = field<std::string>(n, "id", where);
    node.role = node_role_from_string(field<std::string>(n, "role", where));
    const auto pos = field<std::vector<double>>(n, "position", where);
    if (pos.size() != 2 || !std::isfinite(pos[0]) || !std::isfinite(pos[1])) {
      fail(ErrorKind::kScenario, where + ": position must be [x_km, y_km]");
    }
    node.position = Point{pos[0], pos[1]};
    if (n.contains("device")) {
      const auto id = field<std::uint64_t>(n, "device", where);
      auto it = std::find_if(fleet.profiles.begin(), fleet.profiles.end(),
                             [&](const DeviceProfile& p) { return p.device_id().value == id; });
      if (it == fleet.profiles.end()) {
        fail(ErrorKind::kScenario, where + ": device " + std::to_string(id) + " is not in the fleet");
      }
      node.profile = *it;
    } else if (node.role != NodeRole::kVerifierAnchor) {
      fail(ErrorKind::kScenario, where + ": device nodes need a 'device' id");
    }
    for (const auto& other : sc.nodes) {
      if (other.node_id == node.node_id) fail(ErrorKind::kScenario, where + ": duplicate node id " + node.node_id);
    }
    sc.nodes.push_back(std::move(node));
  }

  auto require_node = [&](const std::string& id, const std::string& where, bool device) {
    auto it = std::find_if(sc.nodes.begin(), sc.nodes.end(), [&](const SimNode& n) { return n.node_id == id; });
    if (it == sc.nodes.end()) fail(ErrorKind::kScenario, where + ": unknown node '" + id + "'");
    if (device && !it->profile) fail(ErrorKind::kScenario, where + ": node '" + id + "' is not a device");
  };

  const json script = field_or<json>(root, "script", json::array(), "scenario");
  if (!script.is_array()) fail(ErrorKind::kScenario, "script must be an array");
  for (std::size_t i = 0; i < script.size(); ++i) {
    const json& s = script[i];
    const std::string where = "script[" + std::to_string(i) + "]";
    if (!s.is_object()) fail(ErrorKind::kScenario, where + " must be an object");
    ScriptAction a;
    a.kind = action_kind(field<std::string>(s, "action", where), where);
    a.node = field<std::string>(s, "node", where);
    require_node(a.node, where, true);
    switch (a.kind) {
      case ScriptAction::Kind::kChallenge:
        reject_unknown_keys(s, {"action", "node", "paired", "repeat"}, where);
        a.paired = field_or<bool>(s, "paired", false, where);
        a.repeat = field_or<std::uint32_t>(s, "repeat", 1, where);
        if (a.repeat == 0) fail(ErrorKind::kScenario, where + ": repeat must be >= 1");
        break;
      case ScriptAction::Kind::kReplay:
        reject_unknown_keys(s, {"action", "node", "rewrite_id"}, where);
        a.rewrite_id = field_or<bool>(s, "rewrite_id", false, where);
        break;
      case ScriptAction::Kind::kDecoy:
        reject_unknown_keys(s, {"action", "node", "decoy"}, where);
        a.decoy = field<std::string>(s, "decoy", where);
        require_node(a.decoy, where, true);
        break;
      case ScriptAction::Kind::kRelocate:
        reject_unknown_keys(s, {"action", "node", "dx", "dy"}, where);
        a.dx = field_or<double>(s, "dx", 0.0, where);
        a.dy = field_or<double>(s, "dy", 0.0, where);
        if (!std::isfinite(a.dx) || !std::isfinite(a.dy)) fail(ErrorKind::kScenario, where + ": bad offset");
        break;
      case ScriptAction::Kind::kShrink:
        reject_unknown_keys(s, {"action", "node", "factor"}, where);
        a.factor = field<double>(s, "factor", where);
        if (!(a.factor >= 0.0 && a.factor <= 1.0)) fail(ErrorKind::kScenario, where + ": factor must lie in [0, 1]");
        break;
      case ScriptAction::Kind::kRecord:
      case ScriptAction::Kind::kRestore:
        reject_unknown_keys(s, {"action", "node"}, where);
        break;
    }
    sc.script.push_back(std::move(a));
  }
  return sc;
}

Scenario load_scenario(const std::string& path, const FleetData& fleet) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), fleet);
}

std::string scenario_to_json(const Scenario& sc) {
  json root;
  root["format"] = "gpufp-scenario";
  root["version"] = 1;
  root["name"] = sc.name;
  root["rng_seed"] = sc.rng_seed;
  root["link"] = {{"signal_speed", sc.link.signal_speed},
                  {"processing_jitter", sc.link.processing_jitter},
                  {"drop_probability", sc.link.drop_probability}};
  json nodes = json::array();
  for (const auto& n : sc.nodes) {
    json j{{"id", n.node_id}, {"role", to_string(n.role)}, {"position", {n.position.x, n.position.y}}};
    if (n.profile) j["device"] = n.profile->device_id().value;
    nodes.push_back(std::move(j));
  }
  root["nodes"] = std::move(nodes);
  json script = json::array();
  for (const auto& a : sc.script) {
    json j{{"action", to_string(a.kind)}, {"node", a.node}};
    switch (a.kind) {
      case ScriptAction::Kind::kChallenge:
        j["paired"] = a.paired;
        j["repeat"] = a.repeat;
        break;
      case ScriptAction::Kind::kReplay: j["rewrite_id"] = a.rewrite_id; break;
      case ScriptAction::Kind::kDecoy: j["decoy"] = a.decoy; break;
      case ScriptAction::Kind::kRelocate:
        j["dx"] = a.dx;
        j["dy"] = a.dy;
        break;
      case ScriptAction::Kind::kShrink: j["factor"] = a.factor; break;
      default: break;
    }
    script.push_back(std::move(j));
  }
  root["script"] = std::move(script);
  return root.dump(2) + "\n";
}

// Network -------------------------------------------------------------------

class NetsimTransport final : public Transport {
 public:
  NetsimTransport(Network& net, std::string anchor, std::string device)
      : net_(net), anchor_(std::move(anchor)), device_(std::move(device)),
        inbox_(std::make_shared<Network::Inbox>()) {}

  std::int64_t now_ns() override { return net_.events().now_ns(); }

  void send(std::vector<std::uint8_t> payload) override {
    net_.deliver_challenge(anchor_, device_, std::move(payload), inbox_);
  }

  std::optional<std::vector<std::uint8_t>> receive(std::int64_t deadline_ns) override {
    auto& ev = net_.events();
    while (inbox_->messages.empty()) {
      const auto next = ev.next_time();
      if (!next || *next > deadline_ns) {
        ev.advance_to(deadline_ns);
        return std::nullopt;
      }
      ev.step();
    }
    auto msg = std::move(inbox_->messages.front());
    inbox_->messages.erase(inbox_->messages.begin());
    return msg;
  }

 private:
  Network& net_;
  std::string anchor_;
  std::string device_;
  std::shared_ptr<Network::Inbox> inbox_;
};

Network::Network(std::vector<SimNode> nodes, LinkModel link, SimParams params, std::uint64_t rng_seed)
    : nodes_(std::move(nodes)), link_(link), params_(params), rng_(hash_words({rng_seed, 0x6e657473696dULL})) {
  link_.validate();
  params_.validate();
  for (const auto& n : nodes_) home_.push_back(n.position);
}

const SimNode& Network::node(const std::string& id) const {
  auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const SimNode& n) { return n.node_id == id; });
  if (it == nodes_.end()) fail(ErrorKind::kScenario, "unknown node '" + id + "'");
  return *it;
}

SimNode& Network::node(const std::string& id) {
  return const_cast<SimNode&>(static_cast<const Network&>(*this).node(id));
}

AdversaryState& Network::adversary(const std::string& device_node) {
  node(device_node);
  return adversaries_[device_node];
}

void Network::relocate(const std::string& device_node, double dx, double dy) {
  SimNode& n = node(device_node);
  n.position.x += dx;
  n.position.y += dy;
  const std::size_t i = static_cast<std::size_t>(&n - nodes_.data());
  adversary(device_node).relocated = !(n.position == home_[i]);
}

void Network::restore(const std::string& device_node) {
  SimNode& n = node(device_node);
  n.position = home_[static_cast<std::size_t>(&n - nodes_.data())];
  adversaries_.erase(device_node);
}

std::unique_ptr<Transport> Network::open_channel(const std::string& anchor, const std::string& device_node) {
  node(anchor);
  node(device_node);
  return std::make_unique<NetsimTransport>(*this, anchor, device_node);
}

void Network::deliver_challenge(const std::string& anchor, const std::string& device_node,
                                std::vector<std::uint8_t> bytes, std::shared_ptr<Inbox> inbox) {
  const AdversaryState& adv = adversary(device_node);
  const std::string responder = adv.decoy ? *adv.decoy : device_node;
  try {
    Delivery d = transmit(node(anchor), node(responder), std::move(bytes), link_, rng_);
    events_.schedule_in(to_ns(d.offset_s), [this, anchor, device_node, responder, payload = std::move(d.payload),
                                             inbox]() mutable {
      on_challenge(anchor, device_node, responder, std::move(payload), inbox);
    });
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDelivery) throw;
    ++dropped_;
  }
}

void Network::on_challenge(const std::string& anchor, const std::string& device_node, const std::string& responder,
                           std::vector<std::uint8_t> bytes, std::shared_ptr<Inbox> inbox) {
  ChallengeMessage challenge;
  try {
    challenge = decode_challenge(bytes);
  } catch (const DecodeError&) {
    return;  // devices ignore garbage
  }
  AdversaryState& adv = adversary(device_node);

  if (adv.replay && adv.recorded) {
    std::vector<std::uint8_t> reply = *adv.recorded;
    if (adv.rewrite_id) {
      ResponseMessage msg = decode_response(reply);
      msg.challenge_id = challenge.challenge_id;
      reply = encode_response(msg);
    }
    send_back(responder, anchor, std::move(reply), inbox);
    return;
  }

  const SimNode& hw = node(responder);
  if (!hw.profile) return;
  const std::uint64_t nonce = rng_.next();
  FingerprintRun run = run_fingerprint(*hw.profile, challenge.seed, nonce, params_);
  double duration = run.simulated_duration;
  if (adv.shrink) {
    const double floor = params_.compute_time_mean - params_.compute_time_jitter;
    const double nominal_max = params_.compute_time_mean + params_.compute_time_jitter;
    duration = std::max(0.0, floor - (1.0 - *adv.shrink) * nominal_max);
  }
  std::vector<std::uint8_t> reply = encode_response(make_response(challenge.challenge_id, run.fingerprint));
  if (adv.recording) adv.recorded = reply;
  events_.schedule_in(to_ns(duration), [this, responder, anchor, reply = std::move(reply), inbox]() mutable {
    send_back(responder, anchor, std::move(reply), inbox);
  });
}

void Network::send_back(const std::string& responder, const std::string& anchor, std::vector<std::uint8_t> bytes,
                        std::shared_ptr<Inbox> inbox) {
  try {
    Delivery d = transmit(node(responder), node(anchor), std::move(bytes), link_, rng_);
    events_.schedule_in(to_ns(d.offset_s), [inbox, payload = std::move(d.payload)]() mutable {
      inbox->messages.push_back(std::move(payload));
    });
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDelivery) throw;
    ++dropped_;
  }
}

// Scenario execution ----------------------------------------------------------

std::size_t ScenarioReport::count(bool attack) const {
  return static_cast<std::size_t>(
      std::count_if(rounds.begin(), rounds.end(), [&](const RoundReport& r) { return r.attack == attack; }));
}

std::size_t ScenarioReport::accepted(bool attack) const {
  return static_cast<std::size_t>(std::count_if(
      rounds.begin(), rounds.end(), [&](const RoundReport& r) { return r.attack == attack && r.accepted; }));
}

std::size_t ScenarioReport::replay_alarms(bool attack) const {
  return static_cast<std::size_t>(std::count_if(
      rounds.begin(), rounds.end(), [&](const RoundReport& r) { return r.attack == attack && r.replay_alarm; }));
}

std::size_t ScenarioReport::errors(bool attack) const {
  return static_cast<std::size_t>(std::count_if(
      rounds.begin(), rounds.end(), [&](const RoundReport& r) { return r.attack == attack && r.error; }));
}

ScenarioReport run_scenario(const Scenario& scenario, RegistryData& registry, const TimingPolicy& policy,
                            const VerifierOptions& options) {
  Network net(scenario.nodes, scenario.link, scenario.params, scenario.rng_seed);
  std::vector<std::unique_ptr<Verifier>> verifiers;
  for (const auto& n : scenario.nodes) {
    if (n.role == NodeRole::kVerifierAnchor) {
      verifiers.push_back(std::make_unique<Verifier>(registry, policy, n.node_id, n.position, options));
    }
  }
  if (verifiers.empty()) fail(ErrorKind::kScenario, "scenario has no verifier anchor");

  ScenarioReport report;
  report.name = scenario.name;
  report.rng_seed = scenario.rng_seed;

  for (std::size_t step = 0; step < scenario.script.size(); ++step) {
    const ScriptAction& a = scenario.script[step];
    AdversaryState& adv = net.adversary(a.node);
    switch (a.kind) {
      case ScriptAction::Kind::kRecord: adv.recording = true; continue;
      case ScriptAction::Kind::kReplay:
        adv.replay = true;
        adv.rewrite_id = a.rewrite_id;
        continue;
      case ScriptAction::Kind::kDecoy: adv.decoy = a.decoy; continue;
      case ScriptAction::Kind::kRelocate: net.relocate(a.node, a.dx, a.dy); continue;
      case ScriptAction::Kind::kShrink: adv.shrink = a.factor; continue;
      case ScriptAction::Kind::kRestore: net.restore(a.node); continue;
      case ScriptAction::Kind::kChallenge: break;
    }

    const SimNode& target = net.node(a.node);
    const DeviceId device = target.profile->device_id();
    const DeviceDossier* dossier = registry.find(device);
    for (std::uint32_t rep = 0; rep < a.repeat; ++rep) {
      const AdversaryState& state = net.adversary(a.node);
      const std::string responder = state.decoy ? *state.decoy : a.node;
      std::vector<DistanceBound> bounds;
      const std::size_t first_entry = report.entries.size();
      for (auto& v : verifiers) {
        ChallengeReportEntry e;
        e.step = step;
        e.anchor_id = v->anchor_id();
        e.node = a.node;
        e.device = device;
        e.attack = state.active();
        e.attacks = state.labels();
        auto transport = net.open_channel(v->anchor_id(), a.node);
        try {
          e.result = v->run_challenge(device, *transport, a.paired);
          const auto& tv = e.result->verdict.timing;
          const bool responded = std::all_of(e.result->transcript.exchanges.begin(),
                                             e.result->transcript.exchanges.end(),
                                             [](const Exchange& x) { return x.received_at_ns.has_value(); });
          if (responded) {
            bounds.push_back(bound_distance(static_cast<double>(tv.rtt_ns) * 1e-9, policy, v->anchor_id(),
                                            v->anchor()));
          }
        } catch (const Error& err) {
          if (err.kind() != ErrorKind::kProtocol) throw;
          e.error = err.what();
        }
        report.entries.push_back(std::move(e));
      }

      RoundReport r;
      r.step = step;
      r.node = a.node;
      r.attack = report.entries[first_entry].attack;
      r.accepted = true;
      for (std::size_t i = first_entry; i < report.entries.size(); ++i) {
        const auto& e = report.entries[i];
        if (e.detected()) r.accepted = false;
        if (!e.result) r.error = true;
        else if (e.result->verdict.outcome == Outcome::kReplayAlarm) r.replay_alarm = true;
      }
      r.n_bounds = bounds.size();
      r.responder = net.node(responder).position;
      if (dossier != nullptr) r.claimed = dossier->claimed_location;
      if (!bounds.empty()) {
        const FeasibleRegion region = feasible_region(bounds);
        r.empty = region.empty();
        r.diameter_km = region.diameter_estimate(180);
        r.claimed_inside = check_claimed_location(r.claimed, region);
        r.responder_inside = region.contains(r.responder);
      }
      report.rounds.push_back(r);
    }
  }
  return report;
}

// Reports ---------------------------------------------------------------------

std::string report_jsonl(const ScenarioReport& report) {
  std::string out;
  for (const auto& e : report.entries) {
    json j{{"type", "challenge"},
           {"scenario", report.name},
           {"step", e.step},
           {"anchor", e.anchor_id},
           {"node", e.node},
           {"device", to_string(e.device)},
           {"label", e.attack ? "attack" : "honest"},
           {"attacks", e.attacks}};
    if (!e.result) {
      j["outcome"] = "error";
      j["error"] = e.error;
    } else {
      const Verdict& v = e.result->verdict;
      j["outcome"] = to_string(v.outcome);
      j["paired"] = e.result->transcript.paired;
      json identity{{"accept", v.identity.accept}, {"distance", v.identity.distance}, {"reason", v.identity.reason}};
      identity["matched_device"] = v.identity.matched_device ? json(to_string(*v.identity.matched_device)) : json();
      identity["threshold"] = v.identity.threshold ? json(*v.identity.threshold) : json();
      j["identity"] = std::move(identity);
      j["timing"] = {{"accept", v.timing.accept},
                     {"rtt_ns", v.timing.rtt_ns},
                     {"max_distance_km", v.timing.max_distance_km},
                     {"claimed_distance_km", v.timing.claimed_distance_km},
                     {"rtt_budget_s", v.timing.rtt_budget_s},
                     {"early_arrival", v.timing.early_arrival},
                     {"reason", v.timing.reason}};
      json exchanges = json::array();
      for (const auto& x : e.result->transcript.exchanges) {
        json xj{{"challenge_id", x.challenge_id}, {"seed", to_hex(x.seed)}, {"sent_at_ns", x.sent_at_ns}};
        xj["received_at_ns"] = x.received_at_ns ? json(*x.received_at_ns) : json();
        xj["echoed_challenge_id"] = x.echoed_challenge_id ? json(*x.echoed_challenge_id) : json();
        if (!x.note.empty()) xj["note"] = x.note;
        exchanges.push_back(std::move(xj));
      }
      j["exchanges"] = std::move(exchanges);
    }
    out += j.dump() + "\n";
  }
  for (const auto& r : report.rounds) {
    json j{{"type", "round"},
           {"scenario", report.name},
           {"step", r.step},
           {"node", r.node},
           {"label", r.attack ? "attack" : "honest"},
           {"accepted", r.accepted},
           {"replay_alarm", r.replay_alarm},
           {"error", r.error},
           {"bounds", r.n_bounds},
           {"empty", r.empty},
           {"diameter_km", r.diameter_km},
           {"claimed", {r.claimed.x, r.claimed.y}},
           {"responder", {r.responder.x, r.responder.y}},
           {"claimed_inside", r.claimed_inside},
           {"responder_inside", r.responder_inside}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string report_csv(const ScenarioReport& report, bool header) {
  std::ostringstream out;
  if (header) out << "scenario,label,challenges,accepted,rejected,replay_alarms,errors\n";
  for (bool attack : {false, true}) {
    const std::size_t n = report.count(attack);
    if (n == 0) continue;
    const std::size_t acc = report.accepted(attack);
    out << report.name << ',' << (attack ? "attack" : "honest") << ',' << n << ',' << acc << ','
        << (n - acc) << ',' << report.replay_alarms(attack) << ',' << report.errors(attack) << '\n';
  }
  return out.str();
}

}  // namespace gpufp
