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

// gpufp: enrollment, live challenges, evaluation and attack scenarios on the
// simulated fleet.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpufp/bytes.hpp"
#include "gpufp/harness.hpp"
#include "gpufp/netsim.hpp"
#include "gpufp/protocol.hpp"
#include "gpufp/registry.hpp"

namespace fs = std::filesystem;
using namespace gpufp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRejected = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> rng_seed;
  std::string out = "gpufp-out";
  bool open_set = false;
};

ToolConfig resolve_config(const Globals& g) {
  ToolConfig c = g.config_path.empty() ? ToolConfig{} : load_tool_config(g.config_path);
  if (g.rng_seed) c.experiment.rng_seed = *g.rng_seed;
  if (g.open_set) c.verifier.open_set = true;
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
}

Point parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) fail(ErrorKind::kParameter, "expected X,Y in km, got '" + s + "'");
  try {
    return Point{std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    fail(ErrorKind::kParameter, "expected X,Y in km, got '" + s + "'");
  }
}

// enroll ---------------------------------------------------------------------

struct EnrollArgs {
  std::uint32_t devices = 4;
  std::uint32_t seeds = 16;
  std::uint32_t runs = 4;
  double spread_km = 800.0;
};

int cmd_enroll(const Globals& g, const EnrollArgs& a) {
  const ToolConfig c = resolve_config(g);
  EnrollmentPlan plan;
  plan.n_devices = a.devices;
  plan.seeds_per_device = a.seeds;
  plan.runs_per_seed = a.runs;
  plan.rng_seed = c.experiment.rng_seed;
  plan.sim = c.experiment.sim;
  plan.spread_km = a.spread_km;
  auto [fleet, registry] = build_enrolled_fleet(plan);
  const fs::path out(g.out);
  fs::create_directories(out);
  save_fleet(fleet, out / "fleet.bin");
  save_registry(registry.dossiers, registry.pool, out / "registry.bin");
  std::printf("enrolled %u devices x %u seeds x %u runs into %s\n", a.devices, a.seeds, a.runs,
              (out / "registry.bin").string().c_str());
  for (const auto& d : registry.dossiers) {
    std::printf("  %s at (%.1f, %.1f) km, threshold %llu\n", to_string(d.device_id).c_str(), d.claimed_location.x,
                d.claimed_location.y, static_cast<unsigned long long>(d.identity_threshold.value_or(0)));
  }
  return kExitOk;
}

// challenge --------------------------------------------------------------------

struct ChallengeArgs {
  std::uint64_t device = 0;
  std::string anchor = "0,2500";
  std::string relocate;
  std::optional<double> shrink;
  bool paired = false;
  std::string registry;
  std::string fleet;
};

int cmd_challenge(const Globals& g, const ChallengeArgs& a) {
  const ToolConfig c = resolve_config(g);
  const fs::path registry_path = a.registry.empty() ? fs::path(g.out) / "registry.bin" : fs::path(a.registry);
  const fs::path fleet_path = a.fleet.empty() ? fs::path(g.out) / "fleet.bin" : fs::path(a.fleet);
  RegistryData registry = load_registry(registry_path);
  const FleetData fleet = load_fleet(fleet_path);

  const DeviceDossier* dossier = registry.find(DeviceId{a.device});
  if (dossier == nullptr) fail(ErrorKind::kParameter, "no dossier for " + to_string(DeviceId{a.device}));
  auto profile = std::find_if(fleet.profiles.begin(), fleet.profiles.end(),
                              [&](const DeviceProfile& p) { return p.device_id().value == a.device; });
  if (profile == fleet.profiles.end()) fail(ErrorKind::kParameter, "device is not in the fleet file");

  Scenario sc;
  sc.name = "challenge";
  sc.rng_seed = c.experiment.rng_seed;
  sc.link = c.link;
  sc.params = fleet.params;
  sc.nodes.push_back(SimNode{"anchor-0", parse_point(a.anchor), NodeRole::kVerifierAnchor, std::nullopt});
  const std::string node = to_string(DeviceId{a.device});
  sc.nodes.push_back(SimNode{node, dossier->claimed_location, NodeRole::kHonestDevice, *profile});
  if (!a.relocate.empty()) {
    const Point d = parse_point(a.relocate);
    ScriptAction r;
    r.kind = ScriptAction::Kind::kRelocate;
    r.node = node;
    r.dx = d.x;
    r.dy = d.y;
    sc.script.push_back(r);
  }
  if (a.shrink) {
    if (!(*a.shrink >= 0.0 && *a.shrink <= 1.0)) fail(ErrorKind::kParameter, "--shrink must lie in [0, 1]");
    ScriptAction s;
    s.kind = ScriptAction::Kind::kShrink;
    s.node = node;
    s.factor = *a.shrink;
    sc.script.push_back(s);
  }
  ScriptAction ch;
  ch.kind = ScriptAction::Kind::kChallenge;
  ch.node = node;
  ch.paired = a.paired;
  sc.script.push_back(ch);

  const ScenarioReport report = run_scenario(sc, registry, c.timing, c.verifier);
  save_registry(registry.dossiers, registry.pool, registry_path);
  std::cout << report_jsonl(report);
  const bool accepted = !report.rounds.empty() && report.rounds.front().accepted;
  std::printf("verdict: %s\n", accepted ? "ACCEPT" : "REJECT");
  return accepted ? kExitOk : kExitRejected;
}

// evaluate ---------------------------------------------------------------------

int cmd_evaluate(const Globals& g) {
  const ToolConfig c = resolve_config(g);
  const auto t0 = std::chrono::steady_clock::now();
  const EvaluationResult r = run_evaluation(c.experiment);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_evaluation(r, g.out);
  std::cout << summary_table(r);
  std::fprintf(stderr, "evaluation took %.2f s; outputs in %s\n", secs, g.out.c_str());
  return kExitOk;
}

// attack -----------------------------------------------------------------------

struct AttackArgs {
  std::string scenario = "replay";
  std::uint32_t trials = 20;
  std::string registry;
  std::string fleet;
};

int cmd_attack(const Globals& g, const AttackArgs& a) {
  const ToolConfig c = resolve_config(g);
  ScenarioReport report;
  const auto& names = builtin_scenario_names();
  if (std::find(names.begin(), names.end(), a.scenario) != names.end()) {
    ScenarioSetup setup = builtin_scenario(a.scenario, c.experiment.rng_seed, a.trials, c);
    report = run_scenario(setup.scenario, setup.registry, setup.policy, setup.options);
  } else if (fs::exists(a.scenario)) {
    const fs::path registry_path = a.registry.empty() ? fs::path(g.out) / "registry.bin" : fs::path(a.registry);
    const fs::path fleet_path = a.fleet.empty() ? fs::path(g.out) / "fleet.bin" : fs::path(a.fleet);
    RegistryData registry = load_registry(registry_path);
    const FleetData fleet = load_fleet(fleet_path);
    const Scenario sc = load_scenario(a.scenario, fleet);
    report = run_scenario(sc, registry, c.timing, c.verifier);
    save_registry(registry.dossiers, registry.pool, registry_path);
  } else {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    fail(ErrorKind::kParameter, "unknown scenario '" + a.scenario + "' (built-in: " + known + ")");
  }

  const fs::path out(g.out);
  write_text(out / (report.name + ".jsonl"), report_jsonl(report));
  write_text(out / (report.name + ".csv"), report_csv(report));
  std::cout << report_csv(report);
  const std::size_t attacks = report.count(true);
  const std::size_t missed = report.accepted(true);
  if (attacks > 0) {
    std::printf("attack rounds: %zu, detected: %zu (%.1f%%)\n", attacks, attacks - missed,
                100.0 * static_cast<double>(attacks - missed) / static_cast<double>(attacks));
  }
  const std::size_t honest = report.count(false);
  if (honest > 0) {
    std::printf("honest rounds: %zu, accepted: %zu\n", honest, report.accepted(false));
  }
  return missed == 0 ? kExitOk : kExitRejected;
}

// protocol-dump ------------------------------------------------------------------

std::string golden_vectors() {
  std::string out;
  auto line = [&](const std::string& name, const std::vector<std::uint8_t>& bytes) {
    out += name + " " + to_hex(bytes) + "\n";
  };
  ChallengeMessage ch;
  ch.challenge_id = 0x0123456789abcdefULL;
  ch.seed = Seed{0x0011223344556677ULL, 0x8899aabbccddeeffULL};
  ch.issued_at_ns = 1'700'000'000'123'456'789LL;
  line("challenge", encode_challenge(ch));

  ChallengeMessage zero;
  line("challenge-zero", encode_challenge(zero));

  ResponseMessage resp;
  resp.challenge_id = 42;
  resp.layout = Layout{2, 3};
  resp.elements = {1, 0, 3, 2, 5, 4};
  line("response", encode_response(resp));

  ResponseMessage big;
  big.challenge_id = ~0ULL;
  big.layout = Layout{4, 1};
  big.elements = {0xffffffffu, 0x80000000u, 0x7fffffffu, 0};
  line("response-extremes", encode_response(big));

  // Round trips must reproduce the vectors.
  if (decode_challenge(encode_challenge(ch)) != ch || decode_response(encode_response(resp)) != resp ||
      decode_response(encode_response(big)) != big) {
    fail(ErrorKind::kDecode, "golden vector round trip mismatch");
  }
  return out;
}

int cmd_protocol_dump(const Globals& g, bool write_file) {
  const std::string text = golden_vectors();
  std::cout << text;
  if (write_file) write_text(fs::path(g.out) / "protocol_vectors.txt", text);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kParameter:
    case ErrorKind::kScenario: return kExitUsage;
    default: return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gpufp: GPU fingerprint location verification on a simulated fleet"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config (experiment, sim, timing, link, verifier)");
  app.add_option("--rng-seed", g.rng_seed, "Override experiment.rng_seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--open-set", g.open_set, "Also reject matches beyond the dossier's identity threshold");

  EnrollArgs enroll_args;
  auto* enroll = app.add_subcommand("enroll", "Build a fleet and enroll it into a registry");
  enroll->add_option("--devices", enroll_args.devices, "Number of devices")->capture_default_str();
  enroll->add_option("--seeds-per-device", enroll_args.seeds, "Seeds enrolled per device")->capture_default_str();
  enroll->add_option("--runs-per-seed", enroll_args.runs, "Registration runs per seed")->capture_default_str();
  enroll->add_option("--spread-km", enroll_args.spread_km, "Radius of the claimed-location circle")
      ->capture_default_str();

  ChallengeArgs challenge_args;
  auto* challenge = app.add_subcommand("challenge", "Run one live challenge against a simulated device");
  challenge->add_option("--device", challenge_args.device, "Device id")->capture_default_str();
  challenge->add_option("--anchor", challenge_args.anchor, "Verifier position X,Y km")->capture_default_str();
  challenge->add_option("--relocate", challenge_args.relocate, "Move the device by DX,DY km before answering");
  challenge->add_option("--shrink", challenge_args.shrink, "Adversarial compute-time factor in [0, 1]");
  challenge->add_flag("--paired", challenge_args.paired, "Two exchanges on distinct seeds");
  challenge->add_option("--registry", challenge_args.registry, "Registry file (default OUT/registry.bin)");
  challenge->add_option("--fleet", challenge_args.fleet, "Fleet file (default OUT/fleet.bin)");

  auto* evaluate = app.add_subcommand("evaluate", "Re-identification accuracy and distance census");

  AttackArgs attack_args;
  auto* attack = app.add_subcommand("attack", "Run a built-in or file scenario");
  attack->add_option("--scenario", attack_args.scenario, "Built-in name or scenario JSON path")
      ->capture_default_str();
  attack->add_option("--trials", attack_args.trials, "Attacked rounds for built-in scenarios")
      ->capture_default_str();
  attack->add_option("--registry", attack_args.registry, "Registry file for file scenarios");
  attack->add_option("--fleet", attack_args.fleet, "Fleet file for file scenarios");

  bool dump_write = false;
  auto* dump = app.add_subcommand("protocol-dump", "Print golden wire vectors");
  dump->add_flag("--write", dump_write, "Also write OUT/protocol_vectors.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*enroll) return cmd_enroll(g, enroll_args);
    if (*challenge) return cmd_challenge(g, challenge_args);
    if (*evaluate) return cmd_evaluate(g);
    if (*attack) return cmd_attack(g, attack_args);
    if (*dump) return cmd_protocol_dump(g, dump_write);
  } catch (const Error& e) {
    std::fprintf(stderr, "gpufp: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gpufp: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
