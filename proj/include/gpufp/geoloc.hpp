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

#include <string>
#include <vector>

#include "gpufp/common.hpp"

namespace gpufp {

/// What the verifier expects of an honest response.
struct TimingPolicy {
  double compute_time_min = 2.895;       // seconds
  double compute_time_max = 2.905;       // seconds
  double signal_speed = kSpeedOfLight;   // km/s, used for distance bounds
  double slack = 0.0005;                 // seconds of processing allowance
  /// Propagation speed of the real path, km/s. Only used to build the RTT
  /// budget of an honest device at its claimed location.
  double path_speed = kFiberSpeed;

  void validate() const;
};

/// Upper bound on the anchor-to-device distance implied by one round trip.
struct DistanceBound {
  std::string anchor_id;
  Point anchor;
  double max_distance_km = 0.0;
  double rtt_s = 0.0;
  double compute_time_min_s = 0.0;
  double signal_speed_kms = 0.0;
};

/// max(0, rtt - compute_time_min - slack) * signal_speed / 2.
DistanceBound bound_distance(double rtt_s, const TimingPolicy& policy);
DistanceBound bound_distance(double rtt_s, const TimingPolicy& policy, std::string anchor_id,
                             Point anchor);

struct Disk {
  Point center;
  double radius_km = 0.0;
};

/// Intersection of closed disks.
class FeasibleRegion {
 public:
  static constexpr double kEmptinessTolerance = 1e-6;  // km

  FeasibleRegion() = default;
  explicit FeasibleRegion(std::vector<Disk> disks);

  const std::vector<Disk>& disks() const noexcept { return disks_; }
  bool empty() const noexcept { return empty_; }
  /// A point of the region when non-empty (within the emptiness tolerance).
  const Point& witness() const noexcept { return witness_; }

  /// Exact closed-disk membership on squared distances.
  bool contains(const Point& p) const noexcept;

  /// Largest distance between sampled boundary points of the region; 0 when
  /// empty. `samples_per_disk` controls resolution.
  double diameter_estimate(int samples_per_disk = 720) const;

 private:
  std::vector<Disk> disks_;
  bool empty_ = true;
  Point witness_;
};

FeasibleRegion feasible_region(const std::vector<DistanceBound>& bounds);

/// True iff `claimed` lies in every disk of the region (closed disks).
bool check_claimed_location(const Point& claimed, const FeasibleRegion& region) noexcept;

/// Independent emptiness check by scanning a grid over the bounding box of
/// the smallest disk. Returns true when some grid point lies in every disk
/// (inflated by half a cell diagonal).
bool grid_certify_nonempty(const std::vector<Disk>& disks, double resolution_km = 1.0);

}  // namespace gpufp
