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

#include "gpufp/fingerprint.hpp"

#include <algorithm>
#include <tuple>

namespace gpufp {

namespace {

void require_same_shape(const Fingerprint& a, const Fingerprint& b) {
  if (a.layout != b.layout || a.elements.size() != b.elements.size()) {
    fail(ErrorKind::kDimension, "fingerprints differ in layout or length");
  }
}

// Ranking key for the documented tie-break.
auto match_key(std::uint64_t distance, const GalleryEntry& e) {
  return std::make_tuple(distance, e.device, e.registration_index);
}

void check_gallery(const Fingerprint& query, std::span<const GalleryEntry> gallery) {
  if (gallery.empty()) fail(ErrorKind::kNoCandidates, "registry view is empty");
  for (const auto& entry : gallery) {
    if (entry.fingerprint == nullptr) fail(ErrorKind::kParameter, "gallery entry without fingerprint");
    if (entry.fingerprint->seed != query.seed) {
      fail(ErrorKind::kProtocolMisuse, "registered fingerprint answers seed " +
                                           to_hex(entry.fingerprint->seed) + ", query answers " +
                                           to_hex(query.seed));
    }
    require_same_shape(query, *entry.fingerprint);
  }
}

}  // namespace

std::uint64_t l1_distance(const Fingerprint& a, const Fingerprint& b) {
  require_same_shape(a, b);
  const std::uint32_t* pa = a.elements.data();
  const std::uint32_t* pb = b.elements.data();
  const std::size_t n = a.elements.size();
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += std::max(pa[i], pb[i]) - std::min(pa[i], pb[i]);
  }
  return sum;
}

std::vector<std::vector<double>> normalize_elementwise(std::span<const Fingerprint> group) {
  if (group.empty()) fail(ErrorKind::kDimension, "cannot normalise an empty group");
  const std::size_t n = group.front().elements.size();
  for (const auto& fp : group) {
    if (fp.elements.size() != n) fail(ErrorKind::kDimension, "ragged fingerprint group");
  }
  std::vector<double> mean(n, 0.0);
  for (const auto& fp : group) {
    for (std::size_t j = 0; j < n; ++j) mean[j] += fp.elements[j];
  }
  for (double& m : mean) m /= static_cast<double>(group.size());

  std::vector<std::vector<double>> out;
  out.reserve(group.size());
  for (const auto& fp : group) {
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = fp.elements[j] - mean[j];
    out.push_back(std::move(row));
  }
  return out;
}

MatchResult reidentify(const Fingerprint& query, DeviceId query_device,
                       std::span<const GalleryEntry> gallery) {
  const Fingerprint* q = &query;
  return reidentify_best_of(std::span<const Fingerprint* const>(&q, 1), query_device, gallery);
}

MatchResult reidentify_paired(const Fingerprint& first, const Fingerprint& second,
                              DeviceId query_device, std::span<const GalleryEntry> gallery) {
  const Fingerprint* qs[2] = {&first, &second};
  return reidentify_best_of(qs, query_device, gallery);
}

MatchResult reidentify_best_of(std::span<const Fingerprint* const> queries, DeviceId query_device,
                               std::span<const GalleryEntry> gallery) {
  if (queries.empty()) fail(ErrorKind::kParameter, "no query fingerprints");
  for (const Fingerprint* q : queries) {
    if (q == nullptr) fail(ErrorKind::kParameter, "null query fingerprint");
    check_gallery(*q, gallery);
  }

  const GalleryEntry* best = nullptr;
  std::uint64_t best_distance = 0;
  for (const auto& entry : gallery) {
    std::uint64_t d = l1_distance(*queries.front(), *entry.fingerprint);
    for (std::size_t i = 1; i < queries.size(); ++i) {
      d = std::min(d, l1_distance(*queries[i], *entry.fingerprint));
    }
    if (best == nullptr || match_key(d, entry) < match_key(best_distance, *best)) {
      best = &entry;
      best_distance = d;
    }
  }

  MatchResult result;
  result.query_device = query_device;
  result.matched_device = best->device;
  result.matched_index = best->registration_index;
  result.matched_distance = best_distance;
  result.correct = best->device == query_device;
  return result;
}

const char* to_string(DeviceRelation r) noexcept {
  return r == DeviceRelation::kWithinDevice ? "within_gpu" : "cross_gpu";
}

const char* to_string(SeedRelation r) noexcept {
  return r == SeedRelation::kWithinSeed ? "within_seed" : "cross_seed";
}

std::vector<DistancePair> distance_census(std::span<const CensusEntry> entries) {
  if (entries.size() < 2) fail(ErrorKind::kInsufficientData, "census needs at least 2 fingerprints");
  for (const auto& e : entries) {
    if (e.fingerprint == nullptr) fail(ErrorKind::kParameter, "census entry without fingerprint");
  }
  std::vector<DistancePair> pairs;
  pairs.reserve(entries.size() * (entries.size() - 1) / 2);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      const auto& a = entries[i];
      const auto& b = entries[j];
      DistancePair p;
      p.a_index = i;
      p.b_index = j;
      p.a_device = a.device;
      p.b_device = b.device;
      p.a_seed = a.fingerprint->seed;
      p.b_seed = b.fingerprint->seed;
      p.distance = l1_distance(*a.fingerprint, *b.fingerprint);
      if (p.a_seed == p.b_seed) {
        p.device_relation = a.device == b.device ? DeviceRelation::kWithinDevice
                                                 : DeviceRelation::kCrossDevice;
      }
      if (a.device == b.device) {
        p.seed_relation = p.a_seed == p.b_seed ? SeedRelation::kWithinSeed : SeedRelation::kCrossSeed;
      }
      pairs.push_back(p);
    }
  }
  return pairs;
}

}  // namespace gpufp
