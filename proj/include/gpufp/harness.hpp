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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gpufp/device_model.hpp"
#include "gpufp/fingerprint.hpp"
#include "gpufp/geoloc.hpp"
#include "gpufp/netsim.hpp"
#include "gpufp/registry.hpp"

namespace gpufp {

struct ExperimentConfig {
  std::uint32_t n_devices = 24;
  std::uint32_t n_seeds = 2;
  std::uint32_t n_runs = 10;
  std::uint32_t registration_runs = 8;
  std::uint32_t cross_seed_devices = 8;
  std::uint32_t cross_seed_seeds = 16;
  SimParams sim;
  std::uint64_t rng_seed = 2026;
  /// Worker threads; 0 picks the hardware concurrency. Results do not depend on it.
  unsigned threads = 0;

  /// Throws kParameter. Paired scoring needs two verification runs, so
  /// registration_runs <= n_runs - 2.
  void validate() const;
};

/// Everything the CLI reads from --config. Unknown keys are rejected.
struct ToolConfig {
  ExperimentConfig experiment;
  TimingPolicy timing;
  LinkModel link;
  VerifierOptions verifier;
};

ToolConfig parse_tool_config(const std::string& json_text);
ToolConfig load_tool_config(const std::filesystem::path& path);
std::string tool_config_to_json(const ToolConfig& config);

/// Exact two-sided Clopper-Pearson interval for k successes in n trials.
struct Interval {
  double low = 0.0;
  double high = 1.0;
};
Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double confidence = 0.95);

struct AccuracyReport {
  std::string approach;  // "single" or "paired"
  std::uint64_t trials = 0;
  std::uint64_t correct = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::string split_policy;
};

struct CensusRow {
  std::string relation;
  std::uint64_t distance = 0;
};

struct SeparationSummary {
  std::uint64_t within_count = 0;
  std::uint64_t cross_count = 0;
  double median_within = 0.0;
  double median_cross = 0.0;
  std::uint64_t max_within = 0;
  std::uint64_t min_cross = 0;
};

struct CensusResult {
  std::vector<CensusRow> gpu;   // same-seed pairs: within_gpu / cross_gpu
  std::vector<CensusRow> seed;  // same-device pairs: within_seed / cross_seed
  SeparationSummary gpu_summary;
  SeparationSummary seed_summary;
};

struct EvaluationResult {
  AccuracyReport single;
  AccuracyReport paired;
  std::uint64_t n_splits = 0;
  /// Paired at least as good as single on the same splits.
  bool paired_dominates = false;
  CensusResult census;
};

/// Simulated fleet and fingerprints. runs[d][s][k] answers seeds[s].
struct Dataset {
  std::vector<DeviceProfile> profiles;
  std::vector<Seed> seeds;
  std::vector<std::vector<std::vector<Fingerprint>>> runs;
};

/// n_devices x n_seeds x n_runs runs.
Dataset generate_dataset(const ExperimentConfig& config);
/// First cross_seed_devices devices over cross_seed_seeds fresh seeds.
Dataset generate_cross_seed_dataset(const ExperimentConfig& config);

/// Every choice of n_runs - registration_runs verification indices, in
/// lexicographic order.
std::vector<std::vector<std::uint32_t>> enumerate_splits(std::uint32_t n_runs, std::uint32_t n_verification);

/// Accuracy over all splits. Every split is applied to every (device, seed):
/// single mode scores each verification run against all devices'
/// registration runs for that seed; paired mode scores the verification runs
/// of a (device, seed, split) jointly and keeps the best match.
EvaluationResult run_evaluation(const ExperimentConfig& config);

CensusResult run_census(const ExperimentConfig& config);

SeparationSummary summarize_separation(const std::vector<CensusRow>& rows, const std::string& within,
                                       const std::string& cross);

std::string accuracy_csv(const EvaluationResult& result);
std::string census_csv(const std::vector<CensusRow>& rows);
/// Human-readable accuracy table and separation summaries.
std::string summary_table(const EvaluationResult& result);

/// Writes accuracy.csv, census_gpu.csv and census_seed.csv into `dir`.
void write_evaluation(const EvaluationResult& result, const std::filesystem::path& dir);

/// A scenario with the fleet and registry it runs against.
struct ScenarioSetup {
  Scenario scenario;
  FleetData fleet;
  RegistryData registry;
  TimingPolicy policy;
  VerifierOptions options;
};

struct EnrollmentPlan {
  std::uint32_t n_devices = 4;
  std::uint32_t seeds_per_device = 16;
  std::uint32_t runs_per_seed = 4;
  std::uint64_t rng_seed = 1;
  SimParams sim;
  /// Claimed positions; when shorter than n_devices the rest are placed on a
  /// circle of radius `spread_km` around the origin.
  std::vector<Point> positions;
  double spread_km = 800.0;
};

/// Builds the fleet and enrolls every device on its own block of seeds.
/// Extra unenrolled capacity is not added: challenges draw from enrolled seeds.
std::pair<FleetData, RegistryData> build_enrolled_fleet(const EnrollmentPlan& plan);

/// Names accepted by builtin_scenario.
const std::vector<std::string>& builtin_scenario_names();

/// Ready-to-run scenarios: honest, replay, replay-rewrite, decoy,
/// relocation, fast-compute. `trials` is the number of attacked challenges.
/// Every device owns its seeds, so a closed-set gallery holds only the
/// target's runs; the replay and decoy scenarios therefore run the verifier
/// open-set.
ScenarioSetup builtin_scenario(const std::string& name, std::uint64_t rng_seed, std::uint32_t trials,
                               const ToolConfig& config = {});

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace gpufp
