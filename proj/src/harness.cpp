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

#include "gpufp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>
#include <tuple>

#include <boost/math/distributions/beta.hpp>
#include <json.hpp>

#include "gpufp/random.hpp"

namespace gpufp {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDeviceDomain = 0xf1ee7;
constexpr std::uint64_t kSeedDomain = 0x5eed5;
constexpr std::uint64_t kRunDomain = 0x7275;
constexpr std::uint64_t kCrossSeedDomain = 0xc5eed;
constexpr std::uint64_t kCrossRunDomain = 0xc7275;
constexpr std::uint64_t kScenarioDomain = 0x5ce7a;

}  // namespace

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::kParameter, what);
  };
  require(n_devices >= 1, "n_devices must be >= 1");
  require(n_seeds >= 1, "n_seeds must be >= 1");
  require(n_runs >= 1, "n_runs must be >= 1");
  require(registration_runs >= 1, "registration_runs must be >= 1");
  require(registration_runs < n_runs, "registration_runs must be < n_runs");
  require(n_runs - registration_runs >= 2, "need at least two verification runs (registration_runs <= n_runs - 2)");
  require(cross_seed_devices >= 1, "cross_seed_devices must be >= 1");
  require(cross_seed_seeds >= 1, "cross_seed_seeds must be >= 1");
  sim.validate();
}

// Config ----------------------------------------------------------------------

namespace {

template <typename T>
void read_key(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kParameter, "config " + section + "." + key + " has the wrong type");
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> known, const std::string& section) {
  if (!obj.is_object()) fail(ErrorKind::kParameter, "config section '" + section + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* s) { return k == s; })) {
      fail(ErrorKind::kParameter, "unknown config key '" + (section.empty() ? k : section + "." + k) + "'");
    }
  }
}

}  // namespace

ToolConfig parse_tool_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParameter, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, {"experiment", "sim", "timing", "link", "verifier"}, "");
  ToolConfig c;
  if (root.contains("experiment")) {
    const json& e = root["experiment"];
    check_keys(e,
               {"n_devices", "n_seeds", "n_runs", "registration_runs", "cross_seed_devices", "cross_seed_seeds",
                "rng_seed", "threads"},
               "experiment");
    auto& x = c.experiment;
    read_key(e, "n_devices", x.n_devices, "experiment");
    read_key(e, "n_seeds", x.n_seeds, "experiment");
    read_key(e, "n_runs", x.n_runs, "experiment");
    read_key(e, "registration_runs", x.registration_runs, "experiment");
    read_key(e, "cross_seed_devices", x.cross_seed_devices, "experiment");
    read_key(e, "cross_seed_seeds", x.cross_seed_seeds, "experiment");
    read_key(e, "rng_seed", x.rng_seed, "experiment");
    read_key(e, "threads", x.threads, "experiment");
  }
  if (root.contains("sim")) {
    const json& s = root["sim"];
    check_keys(s,
               {"n_sms", "n_rounds", "sync_interval", "sigma_profile", "sigma_jitter", "sigma_seed_delay",
                "sigma_drift", "compute_time_mean", "compute_time_jitter"},
               "sim");
    auto& p = c.experiment.sim;
    read_key(s, "n_sms", p.n_sms, "sim");
    read_key(s, "n_rounds", p.n_rounds, "sim");
    read_key(s, "sync_interval", p.sync_interval, "sim");
    read_key(s, "sigma_profile", p.sigma_profile, "sim");
    read_key(s, "sigma_jitter", p.sigma_jitter, "sim");
    read_key(s, "sigma_seed_delay", p.sigma_seed_delay, "sim");
    read_key(s, "sigma_drift", p.sigma_drift, "sim");
    read_key(s, "compute_time_mean", p.compute_time_mean, "sim");
    read_key(s, "compute_time_jitter", p.compute_time_jitter, "sim");
  }
  if (root.contains("timing")) {
    const json& t = root["timing"];
    check_keys(t, {"compute_time_min", "compute_time_max", "signal_speed", "slack", "path_speed"}, "timing");
    read_key(t, "compute_time_min", c.timing.compute_time_min, "timing");
    read_key(t, "compute_time_max", c.timing.compute_time_max, "timing");
    read_key(t, "signal_speed", c.timing.signal_speed, "timing");
    read_key(t, "slack", c.timing.slack, "timing");
    read_key(t, "path_speed", c.timing.path_speed, "timing");
  }
  if (root.contains("link")) {
    const json& l = root["link"];
    check_keys(l, {"signal_speed", "processing_jitter", "drop_probability"}, "link");
    read_key(l, "signal_speed", c.link.signal_speed, "link");
    read_key(l, "processing_jitter", c.link.processing_jitter, "link");
    read_key(l, "drop_probability", c.link.drop_probability, "link");
  }
  if (root.contains("verifier")) {
    const json& v = root["verifier"];
    check_keys(v, {"open_set", "threshold", "impostor_gallery", "response_timeout_s"}, "verifier");
    read_key(v, "open_set", c.verifier.open_set, "verifier");
    read_key(v, "impostor_gallery", c.verifier.impostor_gallery, "verifier");
    read_key(v, "response_timeout_s", c.verifier.response_timeout_s, "verifier");
    if (v.contains("threshold") && !v["threshold"].is_null()) {
      std::uint64_t t = 0;
      read_key(v, "threshold", t, "verifier");
      c.verifier.threshold_override = t;
    }
    if (!(c.verifier.response_timeout_s > 0.0)) fail(ErrorKind::kParameter, "verifier.response_timeout_s must be > 0");
  }
  c.experiment.validate();
  c.timing.validate();
  c.link.validate();
  return c;
}

ToolConfig load_tool_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tool_config(ss.str());
}

std::string tool_config_to_json(const ToolConfig& c) {
  const auto& x = c.experiment;
  const auto& p = x.sim;
  json root{
      {"experiment",
       {{"n_devices", x.n_devices},
        {"n_seeds", x.n_seeds},
        {"n_runs", x.n_runs},
        {"registration_runs", x.registration_runs},
        {"cross_seed_devices", x.cross_seed_devices},
        {"cross_seed_seeds", x.cross_seed_seeds},
        {"rng_seed", x.rng_seed},
        {"threads", x.threads}}},
      {"sim",
       {{"n_sms", p.n_sms},
        {"n_rounds", p.n_rounds},
        {"sync_interval", p.sync_interval},
        {"sigma_profile", p.sigma_profile},
        {"sigma_jitter", p.sigma_jitter},
        {"sigma_seed_delay", p.sigma_seed_delay},
        {"sigma_drift", p.sigma_drift},
        {"compute_time_mean", p.compute_time_mean},
        {"compute_time_jitter", p.compute_time_jitter}}},
      {"timing",
       {{"compute_time_min", c.timing.compute_time_min},
        {"compute_time_max", c.timing.compute_time_max},
        {"signal_speed", c.timing.signal_speed},
        {"slack", c.timing.slack},
        {"path_speed", c.timing.path_speed}}},
      {"link",
       {{"signal_speed", c.link.signal_speed},
        {"processing_jitter", c.link.processing_jitter},
        {"drop_probability", c.link.drop_probability}}},
      {"verifier",
       {{"open_set", c.verifier.open_set},
        {"threshold", c.verifier.threshold_override ? json(*c.verifier.threshold_override) : json(nullptr)},
        {"impostor_gallery", c.verifier.impostor_gallery},
        {"response_timeout_s", c.verifier.response_timeout_s}}}};
  return root.dump(2) + "\n";
}

// Statistics ------------------------------------------------------------------

Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double confidence) {
  if (n == 0) fail(ErrorKind::kParameter, "clopper_pearson needs n >= 1");
  if (k > n) fail(ErrorKind::kParameter, "clopper_pearson needs k <= n");
  if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorKind::kParameter, "confidence must lie in (0, 1)");
  const double alpha = 1.0 - confidence;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  Interval ci;
  if (k > 0) ci.low = boost::math::quantile(boost::math::beta_distribution<double>(kd, nd - kd + 1.0), alpha / 2.0);
  if (k < n) {
    ci.high = boost::math::quantile(boost::math::beta_distribution<double>(kd + 1.0, nd - kd), 1.0 - alpha / 2.0);
  }
  return ci;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Data generation -------------------------------------------------------------

namespace {

DeviceProfile fleet_device(const ExperimentConfig& c, std::uint32_t d) {
  return create_device(hash_words({c.rng_seed, kDeviceDomain, d}), c.sim, DeviceId{d});
}

std::vector<Seed> derive_seeds(std::size_t count, std::uint64_t entropy) {
  std::vector<Seed> out;
  for (const auto& e : generate_seed_pool(count, entropy).entries()) out.push_back(e.seed);
  return out;
}

void fill_runs(Dataset& ds, const ExperimentConfig& c, std::uint32_t n_runs, std::uint64_t domain) {
  const std::size_t n_dev = ds.profiles.size();
  const std::size_t n_seed = ds.seeds.size();
  ds.runs.assign(n_dev, std::vector<std::vector<Fingerprint>>(n_seed, std::vector<Fingerprint>(n_runs)));
  parallel_for(n_dev * n_seed * n_runs, c.threads, [&](std::size_t i) {
    const std::size_t k = i % n_runs;
    const std::size_t s = (i / n_runs) % n_seed;
    const std::size_t d = i / (n_runs * n_seed);
    const std::uint64_t nonce = hash_words({c.rng_seed, domain, d, s, k});
    ds.runs[d][s][k] = run_fingerprint(ds.profiles[d], ds.seeds[s], nonce, c.sim).fingerprint;
  });
}

}  // namespace

Dataset generate_dataset(const ExperimentConfig& config) {
  config.validate();
  Dataset ds;
  for (std::uint32_t d = 0; d < config.n_devices; ++d) ds.profiles.push_back(fleet_device(config, d));
  ds.seeds = derive_seeds(config.n_seeds, hash_words({config.rng_seed, kSeedDomain}));
  fill_runs(ds, config, config.n_runs, kRunDomain);
  return ds;
}

Dataset generate_cross_seed_dataset(const ExperimentConfig& config) {
  config.validate();
  Dataset ds;
  for (std::uint32_t d = 0; d < config.cross_seed_devices; ++d) ds.profiles.push_back(fleet_device(config, d));
  ds.seeds = derive_seeds(config.cross_seed_seeds, hash_words({config.rng_seed, kCrossSeedDomain}));
  fill_runs(ds, config, config.n_runs, kCrossRunDomain);
  return ds;
}

std::vector<std::vector<std::uint32_t>> enumerate_splits(std::uint32_t n_runs, std::uint32_t n_verification) {
  if (n_verification == 0 || n_verification > n_runs) fail(ErrorKind::kParameter, "invalid split size");
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::uint32_t> pick(n_verification);
  for (std::uint32_t i = 0; i < n_verification; ++i) pick[i] = i;
  for (;;) {
    out.push_back(pick);
    std::int64_t i = static_cast<std::int64_t>(n_verification) - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n_runs - n_verification + static_cast<std::uint32_t>(i)) --i;
    if (i < 0) return out;
    ++pick[static_cast<std::size_t>(i)];
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n_verification; ++j) pick[j] = pick[j - 1] + 1;
  }
}

// Census ----------------------------------------------------------------------

SeparationSummary summarize_separation(const std::vector<CensusRow>& rows, const std::string& within,
                                       const std::string& cross) {
  std::vector<std::uint64_t> w;
  std::vector<std::uint64_t> x;
  for (const auto& r : rows) {
    if (r.relation == within) w.push_back(r.distance);
    else if (r.relation == cross) x.push_back(r.distance);
  }
  auto median = [](std::vector<std::uint64_t>& v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? static_cast<double>(v[m]) : (static_cast<double>(v[m - 1]) + static_cast<double>(v[m])) / 2.0;
  };
  SeparationSummary s;
  s.within_count = w.size();
  s.cross_count = x.size();
  s.median_within = median(w);
  s.median_cross = median(x);
  s.max_within = w.empty() ? 0 : w.back();
  s.min_cross = x.empty() ? 0 : x.front();
  return s;
}

namespace {

// Same-seed distances for one seed; matrix indexed by d * n_runs + k.
struct SeedMatrix {
  std::size_t n = 0;
  std::vector<std::uint64_t> d;
  std::vector<CensusRow> rows;

  std::uint64_t at(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

std::vector<SeedMatrix> gpu_matrices(const Dataset& ds, unsigned threads) {
  const std::size_t n_dev = ds.profiles.size();
  const std::size_t n_runs = ds.runs.empty() ? 0 : ds.runs[0][0].size();
  std::vector<SeedMatrix> out(ds.seeds.size());
  parallel_for(ds.seeds.size(), threads, [&](std::size_t s) {
    std::vector<CensusEntry> entries;
    for (std::size_t dv = 0; dv < n_dev; ++dv) {
      for (std::size_t k = 0; k < n_runs; ++k) entries.push_back({ds.profiles[dv].device_id(), &ds.runs[dv][s][k]});
    }
    SeedMatrix& m = out[s];
    m.n = entries.size();
    m.d.assign(m.n * m.n, 0);
    if (m.n < 2) return;
    for (const auto& p : distance_census(entries)) {
      m.d[p.a_index * m.n + p.b_index] = p.distance;
      m.d[p.b_index * m.n + p.a_index] = p.distance;
      if (p.device_relation) m.rows.push_back({to_string(*p.device_relation), p.distance});
    }
  });
  return out;
}

std::vector<CensusRow> seed_census_rows(const ExperimentConfig& config) {
  const Dataset ds = generate_cross_seed_dataset(config);
  std::vector<std::vector<CensusRow>> per_device(ds.profiles.size());
  parallel_for(ds.profiles.size(), config.threads, [&](std::size_t dv) {
    std::vector<CensusEntry> entries;
    for (std::size_t s = 0; s < ds.seeds.size(); ++s) {
      for (const auto& fp : ds.runs[dv][s]) entries.push_back({ds.profiles[dv].device_id(), &fp});
    }
    if (entries.size() < 2) return;
    for (const auto& p : distance_census(entries)) {
      if (p.seed_relation) per_device[dv].push_back({to_string(*p.seed_relation), p.distance});
    }
  });
  std::vector<CensusRow> rows;
  for (auto& v : per_device) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

CensusResult assemble_census(const std::vector<SeedMatrix>& mats, std::vector<CensusRow> seed_rows) {
  CensusResult c;
  for (const auto& m : mats) c.gpu.insert(c.gpu.end(), m.rows.begin(), m.rows.end());
  c.seed = std::move(seed_rows);
  c.gpu_summary = summarize_separation(c.gpu, to_string(DeviceRelation::kWithinDevice),
                                       to_string(DeviceRelation::kCrossDevice));
  c.seed_summary = summarize_separation(c.seed, to_string(SeedRelation::kWithinSeed),
                                        to_string(SeedRelation::kCrossSeed));
  return c;
}

}  // namespace

CensusResult run_census(const ExperimentConfig& config) {
  const Dataset ds = generate_dataset(config);
  return assemble_census(gpu_matrices(ds, config.threads), seed_census_rows(config));
}

// Evaluation ------------------------------------------------------------------

EvaluationResult run_evaluation(const ExperimentConfig& config) {
  const Dataset ds = generate_dataset(config);
  const auto mats = gpu_matrices(ds, config.threads);

  const std::uint32_t n_runs = config.n_runs;
  const std::uint32_t n_ver = n_runs - config.registration_runs;
  const auto splits = enumerate_splits(n_runs, n_ver);
  const std::size_t n_dev = ds.profiles.size();

  struct Tally {
    std::uint64_t single_trials = 0, single_correct = 0, paired_trials = 0, paired_correct = 0;
  };
  std::vector<Tally> tallies(splits.size());

  parallel_for(splits.size(), config.threads, [&](std::size_t si) {
    const auto& ver = splits[si];
    std::vector<std::uint32_t> reg;
    for (std::uint32_t k = 0; k < n_runs; ++k) {
      if (std::find(ver.begin(), ver.end(), k) == ver.end()) reg.push_back(k);
    }
    Tally& t = tallies[si];
    using Key = std::tuple<std::uint64_t, std::uint64_t, std::uint32_t>;  // distance, device, reg index
    for (const auto& m : mats) {
      for (std::size_t d = 0; d < n_dev; ++d) {
        Key best_pair{~0ull, ~0ull, ~0u};
        for (std::uint32_t v : ver) {
          const std::size_t q = d * n_runs + v;
          Key best{~0ull, ~0ull, ~0u};
          for (std::size_t e = 0; e < n_dev; ++e) {
            for (std::uint32_t i = 0; i < reg.size(); ++i) {
              const Key key{m.at(q, e * n_runs + reg[i]), ds.profiles[e].device_id().value, i};
              if (key < best) best = key;
            }
          }
          ++t.single_trials;
          if (std::get<1>(best) == ds.profiles[d].device_id().value) ++t.single_correct;
          if (best < best_pair) best_pair = best;
        }
        ++t.paired_trials;
        if (std::get<1>(best_pair) == ds.profiles[d].device_id().value) ++t.paired_correct;
      }
    }
  });

  Tally total;
  for (const auto& t : tallies) {
    total.single_trials += t.single_trials;
    total.single_correct += t.single_correct;
    total.paired_trials += t.paired_trials;
    total.paired_correct += t.paired_correct;
  }

  auto report = [&](const char* approach, std::uint64_t trials, std::uint64_t correct, const std::string& policy) {
    AccuracyReport r;
    r.approach = approach;
    r.trials = trials;
    r.correct = correct;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(trials);
    const Interval ci = clopper_pearson(correct, trials);
    r.ci_low = std::min(ci.low, r.accuracy);
    r.ci_high = std::max(ci.high, r.accuracy);
    r.split_policy = policy;
    return r;
  };

  const std::string splits_desc = std::to_string(splits.size()) + " splits of " + std::to_string(n_runs) +
                                  " runs (" + std::to_string(config.registration_runs) + " registration / " +
                                  std::to_string(n_ver) + " verification), shared by all devices";
  EvaluationResult out;
  out.n_splits = splits.size();
  out.single = report("single", total.single_trials, total.single_correct,
                      "one trial per verification run per (device, seed, split); " + splits_desc +
                          "; Clopper-Pearson 95%");
  out.paired = report("paired", total.paired_trials, total.paired_correct,
                      "one trial per (device, seed, split), best match over the split's verification runs; " +
                          splits_desc + "; Clopper-Pearson 95%");
  out.paired_dominates = out.paired.accuracy >= out.single.accuracy;
  out.census = assemble_census(mats, seed_census_rows(config));
  return out;
}

// Output ----------------------------------------------------------------------

std::string accuracy_csv(const EvaluationResult& result) {
  std::ostringstream out;
  out << "approach,trials,correct,accuracy,ci_low,ci_high\n";
  char buf[256];
  for (const auto* r : {&result.single, &result.paired}) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%.6f,%.6f,%.6f\n", r->approach.c_str(),
                  static_cast<unsigned long long>(r->trials), static_cast<unsigned long long>(r->correct),
                  r->accuracy, r->ci_low, r->ci_high);
    out << buf;
  }
  return out.str();
}

std::string census_csv(const std::vector<CensusRow>& rows) {
  std::string out = "relation,distance\n";
  out.reserve(rows.size() * 20 + out.size());
  for (const auto& r : rows) {
    out += r.relation;
    out += ',';
    out += std::to_string(r.distance);
    out += '\n';
  }
  return out;
}

std::string summary_table(const EvaluationResult& r) {
  std::ostringstream out;
  char buf[256];
  out << "approach  trials   correct  accuracy  95% CI (Clopper-Pearson)\n";
  for (const auto* a : {&r.single, &r.paired}) {
    std::snprintf(buf, sizeof buf, "%-8s  %7llu  %7llu  %7.2f%%  (%.2f%%, %.2f%%)\n", a->approach.c_str(),
                  static_cast<unsigned long long>(a->trials), static_cast<unsigned long long>(a->correct),
                  100.0 * a->accuracy, 100.0 * a->ci_low, 100.0 * a->ci_high);
    out << buf;
  }
  out << "single: " << r.single.split_policy << "\n";
  out << "paired: " << r.paired.split_policy << "\n";
  auto sep = [&](const char* name, const SeparationSummary& s) {
    std::snprintf(buf, sizeof buf,
                  "%s census: %llu within / %llu cross pairs, median %.1f vs %.1f (x%.2f), max within %llu, "
                  "min cross %llu\n",
                  name, static_cast<unsigned long long>(s.within_count),
                  static_cast<unsigned long long>(s.cross_count), s.median_within, s.median_cross,
                  s.median_within > 0 ? s.median_cross / s.median_within : 0.0,
                  static_cast<unsigned long long>(s.max_within), static_cast<unsigned long long>(s.min_cross));
    out << buf;
  };
  sep("gpu", r.census.gpu_summary);
  sep("seed", r.census.seed_summary);
  return out.str();
}

void write_evaluation(const EvaluationResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / name).string());
  };
  write("accuracy.csv", accuracy_csv(result));
  write("census_gpu.csv", census_csv(result.census.gpu));
  write("census_seed.csv", census_csv(result.census.seed));
}

// Enrollment and scenarios ------------------------------------------------------

std::pair<FleetData, RegistryData> build_enrolled_fleet(const EnrollmentPlan& plan) {
  if (plan.n_devices == 0 || plan.seeds_per_device == 0 || plan.runs_per_seed == 0) {
    fail(ErrorKind::kParameter, "enrollment plan counts must be >= 1");
  }
  plan.sim.validate();
  FleetData fleet;
  fleet.params = plan.sim;
  for (std::uint32_t d = 0; d < plan.n_devices; ++d) {
    fleet.profiles.push_back(create_device(hash_words({plan.rng_seed, kDeviceDomain, d}), plan.sim, DeviceId{d}));
  }

  RegistryData reg;
  reg.pool = generate_seed_pool(static_cast<std::size_t>(plan.n_devices) * plan.seeds_per_device,
                                hash_words({plan.rng_seed, kSeedDomain}));
  const auto seeds = reg.pool.entries();

  struct Job {
    std::uint32_t d;
    std::uint32_t s;
  };
  std::vector<std::vector<std::vector<Fingerprint>>> fps(
      plan.n_devices, std::vector<std::vector<Fingerprint>>(plan.seeds_per_device));
  parallel_for(static_cast<std::size_t>(plan.n_devices) * plan.seeds_per_device, 0, [&](std::size_t i) {
    const auto d = static_cast<std::uint32_t>(i / plan.seeds_per_device);
    const auto s = static_cast<std::uint32_t>(i % plan.seeds_per_device);
    const Seed seed = seeds[static_cast<std::size_t>(d) * plan.seeds_per_device + s].seed;
    for (std::uint32_t k = 0; k < plan.runs_per_seed; ++k) {
      const std::uint64_t nonce = hash_words({plan.rng_seed, kRunDomain, d, s, k});
      fps[d][s].push_back(run_fingerprint(fleet.profiles[d], seed, nonce, plan.sim).fingerprint);
    }
  });

  for (std::uint32_t d = 0; d < plan.n_devices; ++d) {
    DeviceDossier dossier;
    dossier.device_id = DeviceId{d};
    if (d < plan.positions.size()) {
      dossier.claimed_location = plan.positions[d];
    } else {
      const double angle = 2.0 * std::numbers::pi * d / plan.n_devices;
      dossier.claimed_location = Point{plan.spread_km * std::cos(angle), plan.spread_km * std::sin(angle)};
    }
    for (std::uint32_t s = 0; s < plan.seeds_per_device; ++s) {
      const Seed seed = seeds[static_cast<std::size_t>(d) * plan.seeds_per_device + s].seed;
      dossier = enroll(std::move(dossier), reg.pool, seed, fps[d][s], 0);
    }
    reg.dossiers.push_back(std::move(dossier));
  }
  return {std::move(fleet), std::move(reg)};
}

const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names{"honest", "replay", "replay-rewrite", "decoy", "relocation",
                                              "fast-compute"};
  return names;
}

ScenarioSetup builtin_scenario(const std::string& name, std::uint64_t rng_seed, std::uint32_t trials,
                               const ToolConfig& config) {
  const auto& names = builtin_scenario_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    fail(ErrorKind::kParameter, "unknown scenario '" + name + "'");
  }
  if (trials == 0) fail(ErrorKind::kParameter, "trials must be >= 1");

  const bool replay = name == "replay" || name == "replay-rewrite";
  const bool decoy = name == "decoy";
  const std::uint32_t n_devices = 4;
  const std::uint32_t n_anchors = (replay || decoy) ? 1 : 3;
  // Honest challenges per trial plus attacked ones, one seed per anchor each.
  const std::uint32_t per_trial = replay ? 2 : 1;
  const std::uint32_t trials_per_device = (trials + n_devices - 1) / n_devices;

  EnrollmentPlan plan;
  plan.n_devices = n_devices;
  plan.seeds_per_device = trials_per_device * per_trial * n_anchors;
  plan.runs_per_seed = 3;
  plan.rng_seed = rng_seed;
  plan.sim = config.experiment.sim;
  auto [fleet, registry] = build_enrolled_fleet(plan);

  ScenarioSetup setup;
  setup.policy = config.timing;
  setup.options = config.verifier;
  if (replay || decoy) setup.options.open_set = true;
  Scenario& sc = setup.scenario;
  sc.name = name;
  sc.rng_seed = rng_seed;
  sc.link = config.link;
  sc.params = plan.sim;

  const double anchor_radius = 2500.0;
  for (std::uint32_t a = 0; a < n_anchors; ++a) {
    const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * a / 3.0;
    sc.nodes.push_back(SimNode{"anchor-" + std::to_string(a),
                               Point{anchor_radius * std::cos(angle), anchor_radius * std::sin(angle)},
                               NodeRole::kVerifierAnchor, std::nullopt});
  }
  for (std::uint32_t d = 0; d < n_devices; ++d) {
    sc.nodes.push_back(SimNode{to_string(DeviceId{d}), registry.dossiers[d].claimed_location,
                               NodeRole::kHonestDevice, fleet.profiles[d]});
  }
  if (decoy) {
    // Unenrolled hardware co-located with each target.
    for (std::uint32_t d = 0; d < n_devices; ++d) {
      const std::uint32_t id = n_devices + d;
      DeviceProfile p = create_device(hash_words({rng_seed, kDeviceDomain, id}), plan.sim, DeviceId{id});
      fleet.profiles.push_back(p);
      sc.nodes.push_back(SimNode{"decoy-" + std::to_string(d), registry.dossiers[d].claimed_location,
                                 NodeRole::kAdversaryDevice, p});
    }
  }

  Rng rng(hash_words({rng_seed, kScenarioDomain}));
  using K = ScriptAction::Kind;
  auto act = [&](K kind, const std::string& node) {
    ScriptAction a;
    a.kind = kind;
    a.node = node;
    return a;
  };
  const double v = config.link.signal_speed;
  const TimingPolicy& pol = config.timing;
  for (std::uint32_t t = 0; t < trials; ++t) {
    const std::uint32_t d = t % n_devices;
    const std::string node = to_string(DeviceId{d});
    if (name == "honest") {
      sc.script.push_back(act(K::kChallenge, node));
    } else if (replay) {
      sc.script.push_back(act(K::kRecord, node));
      sc.script.push_back(act(K::kChallenge, node));
      ScriptAction r = act(K::kReplay, node);
      r.rewrite_id = name == "replay-rewrite" || rng.below(2) == 1;
      sc.script.push_back(r);
      sc.script.push_back(act(K::kChallenge, node));
      sc.script.push_back(act(K::kRestore, node));
    } else if (decoy) {
      ScriptAction a = act(K::kDecoy, node);
      a.decoy = "decoy-" + std::to_string(d);
      sc.script.push_back(a);
      sc.script.push_back(act(K::kChallenge, node));
      sc.script.push_back(act(K::kRestore, node));
    } else {
      double factor = 0.0;
      double distance = 0.0;
      if (name == "relocation") {
        distance = rng.uniform(3000.0, 6000.0);
      } else {
        // Compute shortened by a few milliseconds; relocation well past what that buys.
        const double saved = rng.uniform(0.001, 0.003);
        factor = 1.0 - saved;
        const double allowance =
            v / 2.0 * (pol.slack + saved * pol.compute_time_max + (pol.compute_time_max - pol.compute_time_min));
        distance = 2.0 * allowance + rng.uniform(1000.0, 3000.0);
      }
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      ScriptAction r = act(K::kRelocate, node);
      r.dx = distance * std::cos(angle);
      r.dy = distance * std::sin(angle);
      sc.script.push_back(r);
      if (name == "fast-compute") {
        ScriptAction s = act(K::kShrink, node);
        s.factor = factor;
        sc.script.push_back(s);
      }
      sc.script.push_back(act(K::kChallenge, node));
      sc.script.push_back(act(K::kRestore, node));
    }
  }

  setup.fleet = std::move(fleet);
  setup.registry = std::move(registry);
  return setup;
}

}  // namespace gpufp
