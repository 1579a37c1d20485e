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

#include "gpufp/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpufp/random.hpp"

namespace gpufp {

namespace {

constexpr std::uint64_t kSeedDelayDomain = 0x5eedde1a;
constexpr std::uint64_t kJitterDomain = 0x717e4;
constexpr std::uint64_t kDurationDomain = 0xd0a7;
constexpr std::uint64_t kDriftDomain = 0xd71f7;

void require(bool ok, const char* what) {
  if (!ok) fail(ErrorKind::kParameter, what);
}

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void SimParams::validate() const {
  require(n_sms >= 2, "n_sms must be >= 2");
  require(n_rounds >= 1, "n_rounds must be >= 1");
  require(sync_interval >= 1 && sync_interval <= n_rounds, "sync_interval must lie in [1, n_rounds]");
  require(finite_non_negative(sigma_profile), "sigma_profile must be >= 0");
  require(finite_non_negative(sigma_jitter), "sigma_jitter must be >= 0");
  require(finite_non_negative(sigma_seed_delay), "sigma_seed_delay must be >= 0");
  require(finite_non_negative(sigma_drift), "sigma_drift must be >= 0");
  require(std::isfinite(compute_time_mean) && compute_time_mean > 0.0, "compute_time_mean must be > 0");
  require(finite_non_negative(compute_time_jitter), "compute_time_jitter must be >= 0");
  // Counter values must fit the 32-bit wire elements.
  require(static_cast<std::uint64_t>(n_sms) * n_rounds <= 0xffffffffULL, "n_sms * n_rounds exceeds 2^32 - 1");
}

DeviceProfile create_device(std::uint64_t rng_seed, const SimParams& params) {
  return create_device(rng_seed, params, DeviceId{rng_seed});
}

DeviceProfile create_device(std::uint64_t rng_seed, const SimParams& params, DeviceId id) {
  params.validate();
  Rng rng(hash_words({rng_seed, 0xdec1ce}));
  std::vector<double> offsets(params.n_sms);
  for (double& o : offsets) o = params.sigma_profile * rng.normal();
  if (params.sigma_profile == 0.0) std::fill(offsets.begin(), offsets.end(), 0.0);
  return DeviceProfile(id, std::move(offsets));
}

double seed_delay_unit(const Seed& seed, std::uint32_t sm, std::uint32_t round) noexcept {
  return keyed_normal(hash_words({kSeedDelayDomain, seed.hi, seed.lo, sm, round}));
}

FingerprintRun run_fingerprint(const DeviceProfile& profile, const Seed& seed,
                               std::uint64_t run_nonce, const SimParams& params) {
  params.validate();
  if (profile.sm_offsets().size() != params.n_sms) {
    fail(ErrorKind::kParameter, "profile has " + std::to_string(profile.sm_offsets().size()) +
                                    " SM offsets but params.n_sms is " + std::to_string(params.n_sms));
  }
  const std::uint32_t n_sms = params.n_sms;
  const auto& offsets = profile.sm_offsets();

  Fingerprint fp;
  fp.seed = seed;
  fp.layout = params.layout();
  fp.elements.assign(fp.layout.size(), 0);

  std::vector<double> base_latency(offsets);
  if (params.sigma_drift != 0.0) {
    const std::uint64_t drift_key = hash_words({kDriftDomain, run_nonce, profile.device_id().value});
    for (std::uint32_t s = 0; s < n_sms; ++s) {
      base_latency[s] += params.sigma_drift * keyed_normal(hash_words({drift_key, s}));
    }
  }

  std::vector<std::uint64_t> delay_prefix(n_sms);
  {
    const std::uint64_t h = hash_step(hash_step(hash_step(kHashInit, kSeedDelayDomain), seed.hi), seed.lo);
    for (std::uint32_t s = 0; s < n_sms; ++s) delay_prefix[s] = hash_step(h, s);
  }

  std::vector<double> latency(n_sms);
  std::vector<std::uint32_t> order(n_sms);
  std::uint64_t jitter_key = 0;

  for (std::uint32_t r = 0; r < params.n_rounds; ++r) {
    if (r % params.sync_interval == 0) {
      // Barrier: the jitter stream restarts under a fresh key.
      jitter_key = hash_words({kJitterDomain, run_nonce, profile.device_id().value, seed.hi, seed.lo,
                               r / params.sync_interval});
    }
    const std::uint32_t round_in_epoch = r % params.sync_interval;
    // Same values as seed_delay_unit and hash_words({jitter_key, s, round}),
    // with the constant key prefixes folded once.
    const std::uint64_t jitter_prefix = hash_step(kHashInit, jitter_key);
    for (std::uint32_t s = 0; s < n_sms; ++s) {
      double lambda = base_latency[s];
      if (params.sigma_seed_delay != 0.0) {
        lambda += params.sigma_seed_delay * keyed_normal(hash_step(delay_prefix[s], r));
      }
      if (params.sigma_jitter != 0.0) {
        lambda += params.sigma_jitter * keyed_normal(hash_step(hash_step(jitter_prefix, s), round_in_epoch));
      }
      latency[s] = lambda;
    }
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return latency[a] < latency[b]; });
    const std::uint32_t base = r * n_sms;
    for (std::uint32_t rank = 0; rank < n_sms; ++rank) {
      const std::uint32_t s = order[rank];
      fp.elements[static_cast<std::size_t>(s) * params.n_rounds + r] = base + rank;
    }
  }

  Rng duration_rng(hash_words({kDurationDomain, run_nonce, profile.device_id().value, seed.hi, seed.lo}));
  const double u = duration_rng.uniform(-1.0, 1.0);
  return FingerprintRun{std::move(fp), params.compute_time_mean + u * params.compute_time_jitter};
}

void warmup(const DeviceProfile&) noexcept {}

}  // namespace gpufp
