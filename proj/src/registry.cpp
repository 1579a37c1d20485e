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

#include "gpufp/registry.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "gpufp/random.hpp"

namespace gpufp {

const char* to_string(SeedState s) noexcept {
  switch (s) {
    case SeedState::kFresh: return "fresh";
    case SeedState::kIssued: return "issued";
    case SeedState::kConsumed: return "consumed";
  }
  return "unknown";
}

SeedPool::SeedPool(std::vector<Entry> entries, std::string rng_source)
    : entries_(std::move(entries)), rng_source_(std::move(rng_source)) {
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].seed, i).second) {
      fail(ErrorKind::kParameter, "duplicate seed " + to_hex(entries_[i].seed) + " in pool");
    }
  }
}

SeedPool::SeedPool(const SeedPool& other) {
  std::lock_guard lock(other.mu_);
  entries_ = other.entries_;
  index_ = other.index_;
  rng_source_ = other.rng_source_;
}

SeedPool& SeedPool::operator=(const SeedPool& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  entries_ = other.entries_;
  index_ = other.index_;
  rng_source_ = other.rng_source_;
  return *this;
}

SeedPool::SeedPool(SeedPool&& other) noexcept {
  std::lock_guard lock(other.mu_);
  entries_ = std::move(other.entries_);
  index_ = std::move(other.index_);
  rng_source_ = std::move(other.rng_source_);
}

SeedPool& SeedPool::operator=(SeedPool&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  entries_ = std::move(other.entries_);
  index_ = std::move(other.index_);
  rng_source_ = std::move(other.rng_source_);
  return *this;
}

std::size_t SeedPool::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::size_t SeedPool::count(SeedState state) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.state == state; }));
}

std::optional<SeedState> SeedPool::state(const Seed& seed) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(seed);
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].state;
}

std::string SeedPool::rng_source() const {
  std::lock_guard lock(mu_);
  return rng_source_;
}

std::vector<SeedPool::Entry> SeedPool::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

Seed SeedPool::issue(const std::function<bool(const Seed&)>& eligible) {
  std::lock_guard lock(mu_);
  for (auto& e : entries_) {
    if (e.state == SeedState::kFresh && (!eligible || eligible(e.seed))) {
      e.state = SeedState::kIssued;
      return e.seed;
    }
  }
  fail(ErrorKind::kExhaustion, "seed pool has no eligible fresh seed; enroll new seeds");
}

void SeedPool::consume(const Seed& seed) {
  std::lock_guard lock(mu_);
  auto it = index_.find(seed);
  if (it == index_.end()) fail(ErrorKind::kState, "seed " + to_hex(seed) + " is not in the pool");
  auto& e = entries_[it->second];
  switch (e.state) {
    case SeedState::kFresh:
      fail(ErrorKind::kState, "seed " + to_hex(seed) + " was never issued");
    case SeedState::kConsumed:
      fail(ErrorKind::kReplayState, "seed " + to_hex(seed) + " was already consumed");
    case SeedState::kIssued:
      e.state = SeedState::kConsumed;
      return;
  }
}

bool operator==(const SeedPool& a, const SeedPool& b) {
  if (&a == &b) return true;
  std::scoped_lock lock(a.mu_, b.mu_);
  return a.entries_ == b.entries_ && a.rng_source_ == b.rng_source_;
}

SeedPool generate_seed_pool(std::size_t count, const std::function<Seed()>& source,
                            std::string source_description) {
  if (count == 0) fail(ErrorKind::kParameter, "seed pool count must be >= 1");
  std::vector<SeedPool::Entry> entries;
  entries.reserve(count);
  std::unordered_set<Seed> seen;
  seen.reserve(count);
  while (entries.size() < count) {
    const Seed s = source();
    if (seen.insert(s).second) entries.push_back({s, SeedState::kFresh});
  }
  return SeedPool(std::move(entries), std::move(source_description));
}

SeedPool generate_seed_pool(std::size_t count, std::uint64_t entropy) {
  Rng rng(hash_words({entropy, 0x5eedb001}));
  return generate_seed_pool(
      count, [&] { return Seed{rng.next(), rng.next()}; },
      "splitmix64:entropy=" + std::to_string(entropy));
}

SeedPool generate_seed_pool_from_os(std::size_t count) {
  std::random_device device;
  auto word = [&] {
    return (static_cast<std::uint64_t>(device()) << 32) | static_cast<std::uint64_t>(device());
  };
  return generate_seed_pool(count, [&] { return Seed{word(), word()}; }, "os:random_device");
}

Seed issue_seed(SeedPool& pool) { return pool.issue(); }

void consume_seed(SeedPool& pool, const Seed& seed) { pool.consume(seed); }

const RegistrationRecord* DeviceDossier::record(const Seed& seed) const {
  auto it = records.find(seed);
  return it == records.end() ? nullptr : &it->second;
}

std::optional<std::uint64_t> compute_identity_threshold(const DeviceDossier& dossier) {
  std::vector<std::uint64_t> distances;
  for (const auto& [seed, rec] : dossier.records) {
    const auto& fps = rec.fingerprints;
    for (std::size_t i = 0; i < fps.size(); ++i) {
      for (std::size_t j = i + 1; j < fps.size(); ++j) distances.push_back(l1_distance(fps[i], fps[j]));
    }
  }
  if (distances.empty()) return std::nullopt;
  std::sort(distances.begin(), distances.end());
  // Nearest rank: the smallest value with at least 99% of samples <= it.
  const std::size_t rank = (99 * distances.size() + 99) / 100;
  return distances[std::max<std::size_t>(rank, 1) - 1];
}

DeviceDossier enroll(DeviceDossier dossier, const SeedPool& pool, const Seed& seed,
                     std::span<const Fingerprint> fingerprints, std::int64_t enrolled_at_ns) {
  if (fingerprints.empty()) fail(ErrorKind::kParameter, "enroll needs at least one fingerprint");
  const RegistrationRecord* existing = dossier.record(seed);
  const auto state = pool.state(seed);
  if (!state) fail(ErrorKind::kState, "seed " + to_hex(seed) + " is not in the pool");
  if (*state != SeedState::kFresh && existing == nullptr) {
    fail(ErrorKind::kState, "seed " + to_hex(seed) + " is " + to_string(*state) +
                                " and cannot be used for new enrollment");
  }

  const Layout layout = existing ? existing->fingerprints.front().layout : fingerprints.front().layout;
  for (const auto& fp : fingerprints) {
    if (fp.seed != seed) {
      fail(ErrorKind::kProtocolMisuse, "fingerprint answers seed " + to_hex(fp.seed) +
                                           ", enrolling seed " + to_hex(seed));
    }
    if (fp.layout != layout || fp.elements.size() != layout.size()) {
      fail(ErrorKind::kDimension, "enrollment fingerprints disagree on layout");
    }
  }

  // A batch already stored verbatim (as a contiguous run) is a re-submission.
  // Runs are not de-duplicated individually: noiseless devices legitimately
  // produce identical runs.
  if (existing != nullptr && std::search(existing->fingerprints.begin(), existing->fingerprints.end(),
                                         fingerprints.begin(), fingerprints.end()) != existing->fingerprints.end()) {
    return dossier;
  }
  auto& rec = dossier.records[seed];
  if (existing == nullptr) {
    rec.device_id = dossier.device_id;
    rec.seed = seed;
    rec.enrolled_at_ns = enrolled_at_ns;
  }
  rec.fingerprints.insert(rec.fingerprints.end(), fingerprints.begin(), fingerprints.end());
  dossier.identity_threshold = compute_identity_threshold(dossier);
  return dossier;
}

const DeviceDossier* RegistryData::find(DeviceId id) const {
  auto it = std::find_if(dossiers.begin(), dossiers.end(), [&](const DeviceDossier& d) { return d.device_id == id; });
  return it == dossiers.end() ? nullptr : &*it;
}

DeviceDossier* RegistryData::find(DeviceId id) {
  auto it = std::find_if(dossiers.begin(), dossiers.end(), [&](const DeviceDossier& d) { return d.device_id == id; });
  return it == dossiers.end() ? nullptr : &*it;
}

}  // namespace gpufp
