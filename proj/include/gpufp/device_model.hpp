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
#include <vector>

#include "gpufp/common.hpp"
#include "gpufp/fingerprint.hpp"

namespace gpufp {

/// Knobs of the simulated fingerprinting kernel. Latency quantities are in
/// arbitrary units; only their ratios matter.
struct SimParams {
  std::uint32_t n_sms = 132;
  std::uint32_t n_rounds = 64;
  std::uint32_t sync_interval = 8;
  double sigma_profile = 1.0;     // per-SM manufacturing offset
  double sigma_jitter = 0.35;     // per-run noise
  double sigma_seed_delay = 1.0;  // seed-selected delay
  double sigma_drift = 0.0;       // per-run shift of every SM offset (environment)
  double compute_time_mean = 2.9;     // seconds
  double compute_time_jitter = 0.005; // seconds, uniform half-width

  /// Throws kParameter naming the first violated bound.
  void validate() const;

  Layout layout() const { return Layout{n_sms, n_rounds}; }

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

/// Latent timing characteristics of one simulated GPU. Immutable once built.
class DeviceProfile {
 public:
  DeviceProfile(DeviceId id, std::vector<double> sm_offsets)
      : id_(id), sm_offsets_(std::move(sm_offsets)) {}

  DeviceId device_id() const noexcept { return id_; }
  const std::vector<double>& sm_offsets() const noexcept { return sm_offsets_; }

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;

 private:
  DeviceId id_;
  std::vector<double> sm_offsets_;
};

/// Draws sm_offsets i.i.d. N(0, sigma_profile^2). Deterministic in rng_seed.
/// The device id defaults to rng_seed.
DeviceProfile create_device(std::uint64_t rng_seed, const SimParams& params);
DeviceProfile create_device(std::uint64_t rng_seed, const SimParams& params, DeviceId id);

struct FingerprintRun {
  Fingerprint fingerprint;
  double simulated_duration = 0.0;  // seconds
};

/// One execution of the racing kernel.
///
/// Per round r every SM s races with latency
///   seed_delay(seed, s, r) + sm_offsets[s] + drift(run_nonce, s) + jitter(run_nonce, s, r)
/// and SMs are ranked by ascending latency (ties: lower SM index first). The
/// SM of rank k reads counter value r * n_sms + k. The jitter stream is
/// re-keyed every sync_interval rounds. A pure function of its arguments.
FingerprintRun run_fingerprint(const DeviceProfile& profile, const Seed& seed,
                               std::uint64_t run_nonce, const SimParams& params);

/// Kept for lifecycle parity with the hardware kernel; has no effect here.
void warmup(const DeviceProfile& profile) noexcept;

/// Seed-selected delay for (sm, round), before scaling by sigma_seed_delay.
/// Exposed for tests.
double seed_delay_unit(const Seed& seed, std::uint32_t sm, std::uint32_t round) noexcept;

}  // namespace gpufp
