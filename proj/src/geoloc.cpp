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

#include "gpufp/geoloc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gpufp {

void TimingPolicy::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::kParameter, what);
  };
  require(std::isfinite(compute_time_min) && compute_time_min > 0.0, "compute_time_min must be > 0");
  require(std::isfinite(compute_time_max) && compute_time_max >= compute_time_min,
          "compute_time_max must be >= compute_time_min");
  require(std::isfinite(signal_speed) && signal_speed > 0.0 && signal_speed <= kSpeedOfLight,
          "signal_speed must lie in (0, c]");
  require(std::isfinite(path_speed) && path_speed > 0.0 && path_speed <= kSpeedOfLight,
          "path_speed must lie in (0, c]");
  require(std::isfinite(slack) && slack >= 0.0, "slack must be >= 0");
}

DistanceBound bound_distance(double rtt_s, const TimingPolicy& policy) {
  return bound_distance(rtt_s, policy, {}, Point{});
}

DistanceBound bound_distance(double rtt_s, const TimingPolicy& policy, std::string anchor_id,
                             Point anchor) {
  if (!(rtt_s >= 0.0) || !std::isfinite(rtt_s)) fail(ErrorKind::kParameter, "rtt must be finite and >= 0");
  policy.validate();
  DistanceBound b;
  b.anchor_id = std::move(anchor_id);
  b.anchor = anchor;
  b.rtt_s = rtt_s;
  b.compute_time_min_s = policy.compute_time_min;
  b.signal_speed_kms = policy.signal_speed;
  const double margin = rtt_s - policy.compute_time_min - policy.slack;
  b.max_distance_km = margin > 0.0 ? margin * policy.signal_speed / 2.0 : 0.0;
  return b;
}

namespace {

bool inside_all(const Point& p, const std::vector<Disk>& disks, double tol) {
  for (const auto& d : disks) {
    const double r = d.radius_km + tol;
    if (squared_distance_km(p, d.center) > r * r) return false;
  }
  return true;
}

// Intersection points of two circles, allowing `tol` of slack on tangency.
std::vector<Point> circle_intersections(const Disk& a, const Disk& b, double tol) {
  const double d = distance_km(a.center, b.center);
  if (d < 1e-12) return {};
  if (d > a.radius_km + b.radius_km + tol) return {};
  if (d < std::abs(a.radius_km - b.radius_km) - tol) return {};
  const double along = (a.radius_km * a.radius_km - b.radius_km * b.radius_km + d * d) / (2.0 * d);
  const double h = std::sqrt(std::max(0.0, a.radius_km * a.radius_km - along * along));
  const double ux = (b.center.x - a.center.x) / d;
  const double uy = (b.center.y - a.center.y) / d;
  const Point mid{a.center.x + along * ux, a.center.y + along * uy};
  return {Point{mid.x - h * uy, mid.y + h * ux}, Point{mid.x + h * uy, mid.y - h * ux}};
}

}  // namespace

FeasibleRegion::FeasibleRegion(std::vector<Disk> disks) : disks_(std::move(disks)) {
  if (disks_.empty()) fail(ErrorKind::kParameter, "feasible region needs at least one disk");
  for (const auto& d : disks_) {
    if (!std::isfinite(d.center.x) || !std::isfinite(d.center.y) || !std::isfinite(d.radius_km) ||
        d.radius_km < 0.0) {
      fail(ErrorKind::kParameter, "disk must have a finite centre and radius >= 0");
    }
  }
  // A non-empty intersection of disks either has a vertex (a point where two
  // boundary circles cross) or equals one whole disk, in which case that
  // disk's centre is inside. Testing these candidates decides emptiness.
  for (const auto& d : disks_) {
    if (inside_all(d.center, disks_, kEmptinessTolerance)) {
      empty_ = false;
      witness_ = d.center;
      return;
    }
  }
  for (std::size_t i = 0; i < disks_.size(); ++i) {
    for (std::size_t j = i + 1; j < disks_.size(); ++j) {
      for (const auto& p : circle_intersections(disks_[i], disks_[j], kEmptinessTolerance)) {
        if (inside_all(p, disks_, kEmptinessTolerance)) {
          empty_ = false;
          witness_ = p;
          return;
        }
      }
    }
  }
}

bool FeasibleRegion::contains(const Point& p) const noexcept {
  if (disks_.empty()) return false;
  for (const auto& d : disks_) {
    if (squared_distance_km(p, d.center) > d.radius_km * d.radius_km) return false;
  }
  return true;
}

double FeasibleRegion::diameter_estimate(int samples_per_disk) const {
  if (empty_) return 0.0;
  std::vector<Point> boundary;
  for (const auto& d : disks_) {
    for (int k = 0; k < samples_per_disk; ++k) {
      const double t = 2.0 * std::numbers::pi * k / samples_per_disk;
      const Point p{d.center.x + d.radius_km * std::cos(t), d.center.y + d.radius_km * std::sin(t)};
      if (inside_all(p, disks_, kEmptinessTolerance)) boundary.push_back(p);
    }
  }
  for (std::size_t i = 0; i < disks_.size(); ++i) {
    for (std::size_t j = i + 1; j < disks_.size(); ++j) {
      for (const auto& p : circle_intersections(disks_[i], disks_[j], kEmptinessTolerance)) {
        if (inside_all(p, disks_, kEmptinessTolerance)) boundary.push_back(p);
      }
    }
  }
  double best = 0.0;
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    for (std::size_t j = i + 1; j < boundary.size(); ++j) {
      best = std::max(best, squared_distance_km(boundary[i], boundary[j]));
    }
  }
  return std::sqrt(best);
}

FeasibleRegion feasible_region(const std::vector<DistanceBound>& bounds) {
  if (bounds.empty()) fail(ErrorKind::kParameter, "feasible_region needs at least one bound");
  std::vector<Disk> disks;
  disks.reserve(bounds.size());
  for (const auto& b : bounds) disks.push_back(Disk{b.anchor, b.max_distance_km});
  return FeasibleRegion(std::move(disks));
}

bool check_claimed_location(const Point& claimed, const FeasibleRegion& region) noexcept {
  return region.contains(claimed);
}

bool grid_certify_nonempty(const std::vector<Disk>& disks, double resolution_km) {
  if (disks.empty() || !(resolution_km > 0.0)) fail(ErrorKind::kParameter, "grid certification needs disks and a positive resolution");
  const auto smallest = std::min_element(disks.begin(), disks.end(), [](const Disk& a, const Disk& b) {
    return a.radius_km < b.radius_km;
  });
  const double inflate = resolution_km * std::numbers::sqrt2 / 2.0;
  const double r = smallest->radius_km;
  const auto steps = static_cast<long>(std::ceil(r / resolution_km));
  for (long i = -steps; i <= steps; ++i) {
    for (long j = -steps; j <= steps; ++j) {
      const Point p{smallest->center.x + i * resolution_km, smallest->center.y + j * resolution_km};
      if (inside_all(p, disks, inflate)) return true;
    }
  }
  return false;
}

}  // namespace gpufp
