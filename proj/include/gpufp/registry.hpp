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
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gpufp/common.hpp"
#include "gpufp/device_model.hpp"
#include "gpufp/fingerprint.hpp"

namespace gpufp {

enum class SeedState : std::uint8_t { kFresh = 0, kIssued = 1, kConsumed = 2 };

const char* to_string(SeedState s) noexcept;

/// One-time challenge seeds and their lifecycle fresh -> issued -> consumed.
///
/// State transitions are serialised by an internal mutex, so a pool can be
/// shared between concurrent challenges. Copies snapshot the source.
class SeedPool {
 public:
  struct Entry {
    Seed seed;
    SeedState state = SeedState::kFresh;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  SeedPool() = default;
  /// Throws kParameter on duplicate seeds.
  SeedPool(std::vector<Entry> entries, std::string rng_source);

  SeedPool(const SeedPool& other);
  SeedPool& operator=(const SeedPool& other);
  SeedPool(SeedPool&& other) noexcept;
  SeedPool& operator=(SeedPool&& other) noexcept;

  std::size_t size() const;
  std::size_t count(SeedState state) const;
  std::optional<SeedState> state(const Seed& seed) const;
  std::string rng_source() const;
  /// Snapshot in generation order.
  std::vector<Entry> entries() const;

  /// First fresh seed (generation order) accepted by `eligible`, now issued.
  /// Throws kExhaustion when none qualifies.
  Seed issue(const std::function<bool(const Seed&)>& eligible = {});
  /// issued -> consumed. kState for fresh or unknown seeds, kReplayState for
  /// seeds already consumed.
  void consume(const Seed& seed);

  friend bool operator==(const SeedPool& a, const SeedPool& b);

 private:
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
  std::unordered_map<Seed, std::size_t> index_;
  std::string rng_source_;
};

/// `count` unique 128-bit seeds derived deterministically from `entropy`.
SeedPool generate_seed_pool(std::size_t count, std::uint64_t entropy);

/// Deployment hook: seeds come from `source` (e.g. an OS CSPRNG); duplicates
/// are redrawn.
SeedPool generate_seed_pool(std::size_t count, const std::function<Seed()>& source,
                            std::string source_description);

/// generate_seed_pool backed by std::random_device.
SeedPool generate_seed_pool_from_os(std::size_t count);

Seed issue_seed(SeedPool& pool);
void consume_seed(SeedPool& pool, const Seed& seed);

struct RegistrationRecord {
  DeviceId device_id;
  Seed seed;
  std::vector<Fingerprint> fingerprints;
  std::int64_t enrolled_at_ns = 0;

  friend bool operator==(const RegistrationRecord&, const RegistrationRecord&) = default;
};

/// Everything the verifier knows about one device.
struct DeviceDossier {
  DeviceId device_id;
  Point claimed_location;
  std::map<Seed, RegistrationRecord> records;
  /// 99th percentile of pairwise same-seed distances among enrolled runs;
  /// empty until some seed has at least two runs.
  std::optional<std::uint64_t> identity_threshold;

  const RegistrationRecord* record(const Seed& seed) const;

  friend bool operator==(const DeviceDossier&, const DeviceDossier&) = default;
};

/// Adds enrollment runs for (device, seed). The seed must be fresh in `pool`
/// or already enrolled for this device. Re-submitting fingerprints that are
/// already stored leaves the dossier unchanged; new ones are appended.
DeviceDossier enroll(DeviceDossier dossier, const SeedPool& pool, const Seed& seed,
                     std::span<const Fingerprint> fingerprints, std::int64_t enrolled_at_ns);

/// Nearest-rank 99th percentile of within-seed pairwise distances.
std::optional<std::uint64_t> compute_identity_threshold(const DeviceDossier& dossier);

struct RegistryData {
  std::vector<DeviceDossier> dossiers;
  SeedPool pool;

  const DeviceDossier* find(DeviceId id) const;
  DeviceDossier* find(DeviceId id);

  friend bool operator==(const RegistryData&, const RegistryData&) = default;
};

struct FleetData {
  SimParams params;
  std::vector<DeviceProfile> profiles;

  friend bool operator==(const FleetData&, const FleetData&) = default;
};

// Persistence. See docs/registry-format.md for the byte layout. Loading a
// corrupt, truncated or version-mismatched file throws kIntegrity naming the
// offending section.

std::vector<std::uint8_t> serialize_registry(const std::vector<DeviceDossier>& dossiers,
                                             const SeedPool& pool);
RegistryData deserialize_registry(std::span<const std::uint8_t> bytes);
void save_registry(const std::vector<DeviceDossier>& dossiers, const SeedPool& pool,
                   const std::filesystem::path& path);
RegistryData load_registry(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_fleet(const FleetData& fleet);
FleetData deserialize_fleet(std::span<const std::uint8_t> bytes);
void save_fleet(const FleetData& fleet, const std::filesystem::path& path);
FleetData load_fleet(const std::filesystem::path& path);

}  // namespace gpufp
