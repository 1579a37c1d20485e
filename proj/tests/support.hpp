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

// Hand-rolled generators shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "gpufp/fingerprint.hpp"
#include "gpufp/random.hpp"
#include "gpufp/registry.hpp"

namespace gpufp::testing {

inline Fingerprint random_fingerprint(Rng& rng, Layout layout, Seed seed, std::uint32_t max_value) {
  Fingerprint fp{seed, layout, std::vector<std::uint32_t>(layout.size())};
  for (auto& e : fp.elements) e = static_cast<std::uint32_t>(rng.below(std::uint64_t{max_value} + 1));
  return fp;
}

inline Layout random_layout(Rng& rng, std::uint32_t max_sms = 12, std::uint32_t max_rounds = 6) {
  return Layout{static_cast<std::uint32_t>(1 + rng.below(max_sms)), static_cast<std::uint32_t>(1 + rng.below(max_rounds))};
}

// Naive reference metric.
inline std::uint64_t naive_l1(const Fingerprint& a, const Fingerprint& b) {
  std::uint64_t d = 0;
  for (std::size_t i = 0; i < a.elements.size(); ++i) {
    const std::int64_t x = static_cast<std::int64_t>(a.elements[i]) - static_cast<std::int64_t>(b.elements[i]);
    d += static_cast<std::uint64_t>(x < 0 ? -x : x);
  }
  return d;
}

// Exhaustive nearest neighbour over any number of queries: scans every
// (query, entry) combination and keeps the lexicographic minimum of
// (distance, device, registration index).
inline MatchResult naive_best_of(const std::vector<const Fingerprint*>& queries, DeviceId truth,
                                 const std::vector<GalleryEntry>& gallery) {
  bool found = false;
  std::uint64_t bd = 0, bdev = 0;
  std::uint32_t bidx = 0;
  for (const Fingerprint* q : queries) {
    for (const auto& g : gallery) {
      const std::uint64_t d = naive_l1(*q, *g.fingerprint);
      const bool better = !found || d < bd || (d == bd && (g.device.value < bdev ||
                                                         (g.device.value == bdev && g.registration_index < bidx)));
      if (better) {
        found = true;
        bd = d;
        bdev = g.device.value;
        bidx = g.registration_index;
      }
    }
  }
  MatchResult m;
  m.query_device = truth;
  m.matched_device = DeviceId{bdev};
  m.matched_index = bidx;
  m.matched_distance = bd;
  m.correct = bdev == truth.value;
  return m;
}

// Dossiers with random runs over a fresh pool, then random issue/consume
// states.
inline RegistryData random_registry(Rng& rng) {
  RegistryData reg;
  const std::size_t n_seeds = 1 + rng.below(6);
  reg.pool = generate_seed_pool(n_seeds + rng.below(4), rng.next());
  const auto entries = reg.pool.entries();
  const Layout layout = random_layout(rng, 6, 4);
  const std::size_t n_dev = 1 + rng.below(4);
  for (std::size_t d = 0; d < n_dev; ++d) {
    DeviceDossier dossier;
    dossier.device_id = DeviceId{d * 3 + 1};
    dossier.claimed_location = {rng.uniform(-100, 100), rng.uniform(-100, 100)};
    for (std::size_t s = 0; s < n_seeds; ++s) {
      if (rng.below(3) == 0) continue;
      std::vector<Fingerprint> runs;
      const std::size_t k = 1 + rng.below(4);
      for (std::size_t i = 0; i < k; ++i) runs.push_back(random_fingerprint(rng, layout, entries[s].seed, 50));
      dossier = enroll(std::move(dossier), reg.pool, entries[s].seed, runs, static_cast<std::int64_t>(rng.below(1000)));
    }
    reg.dossiers.push_back(std::move(dossier));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto r = rng.below(3);
    if (r == 0) continue;
    // Issue in order until this seed is reached.
    while (reg.pool.state(entries[i].seed) == SeedState::kFresh) reg.pool.issue();
    if (r == 2 && reg.pool.state(entries[i].seed) == SeedState::kIssued) reg.pool.consume(entries[i].seed);
  }
  return reg;
}

}  // namespace gpufp::testing
