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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gpufp/common.hpp"

namespace gpufp {

/// Shape of a fingerprint: one value per (SM, round).
struct Layout {
  std::uint32_t n_sms = 0;
  std::uint32_t n_rounds = 0;

  constexpr std::size_t size() const noexcept {
    return static_cast<std::size_t>(n_sms) * n_rounds;
  }

  friend constexpr bool operator==(const Layout&, const Layout&) = default;
};

/// Counter values read by the racing thread of each SM in each round.
/// Elements are SM-major: all rounds of SM 0, then SM 1, ...
struct Fingerprint {
  Seed seed;
  Layout layout;
  std::vector<std::uint32_t> elements;

  std::uint32_t at(std::uint32_t sm, std::uint32_t round) const {
    return elements[static_cast<std::size_t>(sm) * layout.n_rounds + round];
  }

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// Sum of absolute element differences. Throws kDimension when layouts differ.
std::uint64_t l1_distance(const Fingerprint& a, const Fingerprint& b);

/// Subtracts the element-wise mean of the group from every member.
std::vector<std::vector<double>> normalize_elementwise(std::span<const Fingerprint> group);

/// One registered fingerprint as seen by the matcher. Non-owning.
struct GalleryEntry {
  DeviceId device;
  std::uint32_t registration_index = 0;
  const Fingerprint* fingerprint = nullptr;
};

struct MatchResult {
  DeviceId query_device;
  DeviceId matched_device;
  std::uint32_t matched_index = 0;  // registration index of the winning entry
  std::uint64_t matched_distance = 0;
  bool correct = false;
};

// Nearest-neighbour re-identification. The winner minimises
// (distance, device id, registration index) lexicographically, so the result
// does not depend on gallery order.

MatchResult reidentify(const Fingerprint& query, DeviceId query_device,
                       std::span<const GalleryEntry> gallery);

MatchResult reidentify_paired(const Fingerprint& first, const Fingerprint& second,
                              DeviceId query_device, std::span<const GalleryEntry> gallery);

/// Generalisation of the paired rule to any number of runs: the global
/// minimum over every (query, entry) combination.
MatchResult reidentify_best_of(std::span<const Fingerprint* const> queries, DeviceId query_device,
                               std::span<const GalleryEntry> gallery);

enum class DeviceRelation { kWithinDevice, kCrossDevice };
enum class SeedRelation { kWithinSeed, kCrossSeed };

const char* to_string(DeviceRelation r) noexcept;
const char* to_string(SeedRelation r) noexcept;

struct CensusEntry {
  DeviceId device;
  const Fingerprint* fingerprint = nullptr;
};

/// A compared pair. Device tags are only assigned to same-seed pairs and
/// seed tags only to same-device pairs; a pair may carry neither.
struct DistancePair {
  std::size_t a_index = 0;
  std::size_t b_index = 0;
  DeviceId a_device;
  DeviceId b_device;
  Seed a_seed;
  Seed b_seed;
  std::uint64_t distance = 0;
  std::optional<DeviceRelation> device_relation;
  std::optional<SeedRelation> seed_relation;
};

/// All n(n-1)/2 unordered pairs, ordered by (a_index, b_index).
std::vector<DistancePair> distance_census(std::span<const CensusEntry> entries);

}  // namespace gpufp
