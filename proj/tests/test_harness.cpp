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

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>

#include "gpufp/harness.hpp"
#include "support.hpp"

using namespace gpufp;
using namespace gpufp::testing;

namespace {

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.n_devices = 6;
  c.n_seeds = 2;
  c.n_runs = 6;
  c.registration_runs = 3;
  c.cross_seed_devices = 3;
  c.cross_seed_seeds = 4;
  c.sim.n_sms = 12;
  c.sim.n_rounds = 4;
  c.sim.sync_interval = 2;
  c.sim.sigma_jitter = 1.2;
  c.threads = 2;
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

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("splits are the lexicographic combinations") {
  const auto s = enumerate_splits(5, 2);
  CHECK(s.size() == 10);
  CHECK(s.front() == std::vector<std::uint32_t>{0, 1});
  CHECK(s[1] == std::vector<std::uint32_t>{0, 2});
  CHECK(s.back() == std::vector<std::uint32_t>{3, 4});
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(enumerate_splits(10, 2).size() == 45);
  for (std::uint32_t n = 1; n <= 9; ++n) {
    for (std::uint32_t k = 1; k <= n; ++k) {
      const auto all = enumerate_splits(n, k);
      CHECK(all.size() == choose(n, k));
      CHECK(std::set(all.begin(), all.end()).size() == all.size());
    }
  }
  CHECK(kind_of([] { enumerate_splits(3, 0); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { enumerate_splits(3, 4); }) == ErrorKind::kParameter);
}

TEST_CASE("Clopper-Pearson reference values") {
  // Reference values from scipy.stats.beta.ppf.
  struct Ref {
    std::uint64_t k, n;
    double lo, hi;
  };
  const Ref refs[] = {
      {0, 10, 0.0, 0.3084971078187608},
      {10, 10, 0.6915028921812392, 1.0},
      {5, 10, 0.18708602844739855, 0.8129139715526015},
      {4320, 4320, 0.9991464571940274, 1.0},
      {2160, 2160, 0.9982936429233764, 1.0},
      {1, 100, 0.00025314603297742064, 0.054459385392080645},
      {97, 100, 0.91482394702572, 0.9937700284616936},
  };
  for (const auto& r : refs) {
    const auto ci = clopper_pearson(r.k, r.n);
    CHECK(ci.low == doctest::Approx(r.lo).epsilon(1e-9));
    CHECK(ci.high == doctest::Approx(r.hi).epsilon(1e-9));
  }
  CHECK(kind_of([] { clopper_pearson(1, 0); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { clopper_pearson(3, 2); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { clopper_pearson(1, 2, 1.0); }) == ErrorKind::kParameter);
}

TEST_CASE("evaluation agrees with direct matching") {
  const auto cfg = small_experiment();
  const auto result = run_evaluation(cfg);
  const auto ds = generate_dataset(cfg);
  const std::uint32_t n_ver = cfg.n_runs - cfg.registration_runs;
  const auto splits = enumerate_splits(cfg.n_runs, n_ver);

  std::uint64_t single_ok = 0, single_n = 0, paired_ok = 0, paired_n = 0;
  for (const auto& ver : splits) {
    std::vector<std::uint32_t> reg;
    for (std::uint32_t k = 0; k < cfg.n_runs; ++k) {
      if (std::find(ver.begin(), ver.end(), k) == ver.end()) reg.push_back(k);
    }
    for (std::size_t s = 0; s < ds.seeds.size(); ++s) {
      std::vector<GalleryEntry> gallery;
      for (std::size_t d = 0; d < ds.profiles.size(); ++d) {
        for (std::uint32_t i = 0; i < reg.size(); ++i) {
          gallery.push_back({ds.profiles[d].device_id(), i, &ds.runs[d][s][reg[i]]});
        }
      }
      for (std::size_t d = 0; d < ds.profiles.size(); ++d) {
        const DeviceId truth = ds.profiles[d].device_id();
        std::vector<const Fingerprint*> queries;
        for (auto k : ver) {
          queries.push_back(&ds.runs[d][s][k]);
          ++single_n;
          single_ok += naive_best_of({queries.back()}, truth, gallery).correct;
        }
        ++paired_n;
        paired_ok += naive_best_of(queries, truth, gallery).correct;
      }
    }
  }
  CHECK(result.n_splits == splits.size());
  CHECK(result.single.trials == single_n);
  CHECK(result.single.correct == single_ok);
  CHECK(result.paired.trials == paired_n);
  CHECK(result.paired.correct == paired_ok);
  CHECK(result.single.accuracy == doctest::Approx(static_cast<double>(single_ok) / single_n));
  CHECK(single_ok < single_n);  // noisy enough to make the comparison meaningful
}

TEST_CASE("trial accounting for the default experiment shape") {
  ExperimentConfig cfg;
  cfg.sim.n_sms = 8;
  cfg.sim.n_rounds = 4;
  cfg.sim.sync_interval = 2;
  const auto r = run_evaluation(cfg);
  CHECK(r.n_splits == 45);
  CHECK(r.single.trials == 45u * 24 * 2 * 2);
  CHECK(r.paired.trials == 45u * 24 * 2);
  CHECK(r.single.split_policy.find("45 splits") != std::string::npos);
  CHECK(r.paired.split_policy.find("45 splits") != std::string::npos);
  CHECK(r.census.gpu_summary.within_count == 2160);
  CHECK(r.census.gpu_summary.cross_count == 55200);
  CHECK(r.census.seed_summary.within_count == 5760);
  CHECK(r.census.seed_summary.cross_count == 96000);
  CHECK(r.census.gpu.size() == 2160 + 55200);
}

TEST_CASE("noise-free devices are always re-identified") {
  auto cfg = small_experiment();
  cfg.sim.sigma_jitter = 0.0;
  cfg.sim.sigma_drift = 0.0;
  const auto r = run_evaluation(cfg);
  CHECK(r.single.correct == r.single.trials);
  CHECK(r.paired.correct == r.paired.trials);
  CHECK(r.census.gpu_summary.max_within == 0);
  CHECK(r.census.seed_summary.max_within == 0);
  CHECK(r.census.gpu_summary.min_cross > 0);
  CHECK(r.paired_dominates);
}

TEST_CASE("a single device") {
  auto cfg = small_experiment();
  cfg.n_devices = 1;
  cfg.cross_seed_devices = 1;
  const auto r = run_evaluation(cfg);
  CHECK(r.single.accuracy == 1.0);
  CHECK(r.census.gpu_summary.cross_count == 0);
  CHECK(r.census.gpu_summary.min_cross == 0);
  CHECK(summary_table(r).size() > 0);
}

TEST_CASE("evaluation does not depend on the thread count") {
  auto cfg = small_experiment();
  cfg.threads = 1;
  const auto a = run_evaluation(cfg);
  cfg.threads = 3;
  const auto b = run_evaluation(cfg);
  CHECK(accuracy_csv(a) == accuracy_csv(b));
  CHECK(census_csv(a.census.gpu) == census_csv(b.census.gpu));
  CHECK(census_csv(a.census.seed) == census_csv(b.census.seed));
}

TEST_CASE("separation summary by hand") {
  const std::vector<CensusRow> rows{{"w", 4}, {"x", 10}, {"w", 2}, {"x", 7}, {"w", 9}, {"other", 0}, {"x", 8}, {"x", 3}};
  const auto s = summarize_separation(rows, "w", "x");
  CHECK(s.within_count == 3);
  CHECK(s.cross_count == 4);
  CHECK(s.median_within == 4.0);
  CHECK(s.median_cross == 7.5);
  CHECK(s.max_within == 9);
  CHECK(s.min_cross == 3);
}

TEST_CASE("evaluation output files") {
  const auto r = run_evaluation(small_experiment());
  const auto dir = std::filesystem::temp_directory_path() / "gpufp_test_eval";
  std::filesystem::remove_all(dir);
  write_evaluation(r, dir);
  for (const char* f : {"accuracy.csv", "census_gpu.csv", "census_seed.csv"}) CHECK(std::filesystem::exists(dir / f));
  std::ifstream in(dir / "census_gpu.csv");
  std::string first;
  std::getline(in, first);
  CHECK(first == "relation,distance");
  std::filesystem::remove_all(dir);
  CHECK(accuracy_csv(r).find("single,") != std::string::npos);
}

TEST_CASE("tool config") {
  const auto c = parse_tool_config(R"({"experiment": {"n_devices": 5}, "sim": {"n_sms": 40}, "timing": {"slack": 0.001}})");
  CHECK(c.experiment.n_devices == 5);
  CHECK(c.experiment.sim.n_sms == 40);
  CHECK(c.timing.slack == 0.001);
  const auto again = parse_tool_config(tool_config_to_json(c));
  CHECK(tool_config_to_json(again) == tool_config_to_json(c));
  CHECK(kind_of([] { parse_tool_config(R"({"experimnet": {}})"); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { parse_tool_config(R"({"sim": {"n_smss": 3}})"); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { parse_tool_config(R"({"experiment": {"n_runs": 9}})"); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { parse_tool_config("[1"); }) == ErrorKind::kParameter);
  const auto v = parse_tool_config(R"({"verifier": {"open_set": true, "threshold": 120}})");
  CHECK(v.verifier.open_set);
  CHECK(v.verifier.threshold_override == 120u);
  CHECK_FALSE(parse_tool_config("{}").verifier.open_set);
  CHECK_FALSE(parse_tool_config(R"({"verifier": {"threshold": null}})").verifier.threshold_override);
  CHECK(tool_config_to_json(parse_tool_config(tool_config_to_json(v))) == tool_config_to_json(v));
  CHECK(kind_of([] { parse_tool_config(R"({"verifier": {"response_timeout_s": 0}})"); }) == ErrorKind::kParameter);
}

TEST_CASE("enrolled fleets") {
  EnrollmentPlan plan;
  plan.n_devices = 3;
  plan.seeds_per_device = 2;
  plan.runs_per_seed = 2;
  plan.sim.n_sms = 8;
  plan.sim.n_rounds = 4;
  plan.sim.sync_interval = 2;
  plan.positions = {{1, 2}};
  const auto [fleet, registry] = build_enrolled_fleet(plan);
  CHECK(fleet.profiles.size() == 3);
  CHECK(registry.pool.size() == 6);
  CHECK(registry.pool.count(SeedState::kFresh) == 6);
  CHECK(registry.dossiers[0].claimed_location == Point{1, 2});
  CHECK(distance_km(registry.dossiers[1].claimed_location, {0, 0}) == doctest::Approx(plan.spread_km));
  for (const auto& d : registry.dossiers) {
    CHECK(d.records.size() == 2);
    for (const auto& [seed, rec] : d.records) CHECK(rec.fingerprints.size() == 2);
  }
  const auto [f2, r2] = build_enrolled_fleet(plan);
  CHECK(f2 == fleet);
  CHECK(r2 == registry);
}

TEST_CASE("builtin scenarios") {
  CHECK(builtin_scenario_names().size() == 6);
  CHECK(kind_of([] { builtin_scenario("nope", 1, 1); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { builtin_scenario("honest", 1, 0); }) == ErrorKind::kParameter);
  const auto s = builtin_scenario("decoy", 1, 3);
  CHECK(s.fleet.profiles.size() == 8);
  CHECK(s.registry.dossiers.size() == 4);
}

TEST_CASE("parallel_for visits every index once") {
  for (unsigned threads : {0u, 1u, 4u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));
  }
}
