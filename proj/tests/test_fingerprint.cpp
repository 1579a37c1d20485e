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

#include <doctest.h>

#include <set>

#include "gpufp/fingerprint.hpp"
#include "support.hpp"

using namespace gpufp;
using namespace gpufp::testing;

namespace {

Fingerprint fp(std::vector<std::uint32_t> v, Seed seed = {0, 1}) {
  const auto n = static_cast<std::uint32_t>(v.size());
  return Fingerprint{seed, Layout{n, 1}, std::move(v)};
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("l1 distance by hand") {
  CHECK(l1_distance(fp({1, 2, 3}), fp({3, 2, 1})) == 4);
  CHECK(l1_distance(fp({0, 0}), fp({0, 0})) == 0);
  CHECK(l1_distance(fp({0xffffffffu}), fp({0})) == 0xffffffffull);
}

TEST_CASE("l1 distance rejects mismatched shapes") {
  CHECK(kind_of([] { l1_distance(fp({1, 2}), fp({1, 2, 3})); }) == ErrorKind::kDimension);
  Fingerprint a{{}, Layout{2, 2}, {1, 2, 3, 4}};
  Fingerprint b{{}, Layout{4, 1}, {1, 2, 3, 4}};
  CHECK(kind_of([&] { l1_distance(a, b); }) == ErrorKind::kDimension);
}

TEST_CASE("l1 distance matches the naive sum and the metric axioms") {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const Layout layout = random_layout(rng);
    const auto a = random_fingerprint(rng, layout, {}, 1000);
    const auto b = random_fingerprint(rng, layout, {}, 1000);
    const auto c = random_fingerprint(rng, layout, {}, 1000);
    CHECK(l1_distance(a, b) == naive_l1(a, b));
    CHECK(l1_distance(a, a) == 0);
    CHECK(l1_distance(a, b) == l1_distance(b, a));
    CHECK(l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c));
    if (a != b) CHECK(l1_distance(a, b) > 0);
  }
}

TEST_CASE("reidentify breaks ties on device then registration index") {
  const auto q = fp({5, 5});
  const auto x = fp({5, 6});
  const auto y = fp({6, 5});
  std::vector<GalleryEntry> g{{DeviceId{9}, 0, &x}, {DeviceId{3}, 1, &y}, {DeviceId{3}, 0, &x}};
  const auto m = reidentify(q, DeviceId{3}, g);
  CHECK(m.matched_device == DeviceId{3});
  CHECK(m.matched_index == 0);
  CHECK(m.matched_distance == 1);
  CHECK(m.correct);
  std::reverse(g.begin(), g.end());
  const auto m2 = reidentify(q, DeviceId{3}, g);
  CHECK(m2.matched_device == m.matched_device);
  CHECK(m2.matched_index == m.matched_index);
}

TEST_CASE("reidentify errors") {
  const auto q = fp({1, 2});
  CHECK(kind_of([&] { reidentify(q, DeviceId{0}, {}); }) == ErrorKind::kNoCandidates);
  const auto other = fp({1, 2}, Seed{9, 9});
  std::vector<GalleryEntry> g{{DeviceId{0}, 0, &other}};
  CHECK(kind_of([&] { reidentify(q, DeviceId{0}, g); }) == ErrorKind::kProtocolMisuse);
  const auto longer = fp({1, 2, 3});
  std::vector<GalleryEntry> g2{{DeviceId{0}, 0, &longer}};
  CHECK(kind_of([&] { reidentify(q, DeviceId{0}, g2); }) == ErrorKind::kDimension);
}

TEST_CASE("paired matching keeps the better run") {
  // One noisy and one clean run: the clean run's distance wins.
  const auto reg = fp({10, 20, 30});
  const auto impostor = fp({30, 20, 10});
  const auto noisy = fp({25, 20, 15});
  const auto clean = fp({10, 21, 30});
  std::vector<GalleryEntry> g{{DeviceId{1}, 0, &reg}, {DeviceId{2}, 0, &impostor}};
  const auto single = reidentify(noisy, DeviceId{1}, g);
  const auto paired = reidentify_paired(noisy, clean, DeviceId{1}, g);
  CHECK(paired.correct);
  CHECK(paired.matched_distance == 1);
  CHECK(paired.matched_distance <= single.matched_distance);
}

TEST_CASE("matching agrees with an exhaustive scan") {
  Rng rng(23);
  for (int t = 0; t < 300; ++t) {
    const Layout layout = random_layout(rng, 6, 3);
    const Seed seed{rng.next(), rng.next()};
    const std::size_t n = 1 + rng.below(30);
    std::vector<Fingerprint> regs;
    regs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) regs.push_back(random_fingerprint(rng, layout, seed, 4));
    std::vector<GalleryEntry> g;
    for (std::size_t i = 0; i < n; ++i) {
      g.push_back({DeviceId{rng.below(4)}, static_cast<std::uint32_t>(rng.below(3)), &regs[i]});
    }
    const auto q1 = random_fingerprint(rng, layout, seed, 4);
    const auto q2 = random_fingerprint(rng, layout, seed, 4);
    const DeviceId truth{rng.below(4)};
    const auto a = reidentify(q1, truth, g);
    const auto b = naive_best_of({&q1}, truth, g);
    CHECK(a.matched_device == b.matched_device);
    CHECK(a.matched_index == b.matched_index);
    CHECK(a.matched_distance == b.matched_distance);
    CHECK(a.correct == b.correct);
    const auto p = reidentify_paired(q1, q2, truth, g);
    const auto pn = naive_best_of({&q1, &q2}, truth, g);
    CHECK(p.matched_device == pn.matched_device);
    CHECK(p.matched_index == pn.matched_index);
    CHECK(p.matched_distance == pn.matched_distance);
  }
}

TEST_CASE("census tags pairs by shared seed or shared device") {
  const Seed s1{0, 1}, s2{0, 2};
  const auto a = fp({1, 2}, s1), b = fp({2, 2}, s1), c = fp({4, 4}, s2), d = fp({0, 0}, s1);
  std::vector<CensusEntry> e{{DeviceId{0}, &a}, {DeviceId{0}, &b}, {DeviceId{0}, &c}, {DeviceId{1}, &d}};
  const auto pairs = distance_census(e);
  REQUIRE(pairs.size() == 6);
  int within_gpu = 0, cross_gpu = 0, within_seed = 0, cross_seed = 0, untagged = 0;
  for (const auto& p : pairs) {
    CHECK(p.a_index < p.b_index);
    CHECK(p.distance == naive_l1(*e[p.a_index].fingerprint, *e[p.b_index].fingerprint));
    if (p.device_relation == DeviceRelation::kWithinDevice) ++within_gpu;
    if (p.device_relation == DeviceRelation::kCrossDevice) ++cross_gpu;
    if (p.seed_relation == SeedRelation::kWithinSeed) ++within_seed;
    if (p.seed_relation == SeedRelation::kCrossSeed) ++cross_seed;
    if (!p.device_relation && !p.seed_relation) ++untagged;
  }
  // (a,b) same seed same device; (a,d),(b,d) same seed cross device;
  // (a,c),(b,c) same device cross seed; (c,d) neither.
  CHECK(within_gpu == 1);
  CHECK(cross_gpu == 2);
  CHECK(within_seed == 1);
  CHECK(cross_seed == 2);
  CHECK(untagged == 1);
  CHECK(std::string(to_string(DeviceRelation::kWithinDevice)) == "within_gpu");
  CHECK(std::string(to_string(SeedRelation::kCrossSeed)) == "cross_seed");
}

TEST_CASE("census needs two entries") {
  const auto a = fp({1});
  std::vector<CensusEntry> one{{DeviceId{0}, &a}};
  CHECK(kind_of([&] { distance_census(one); }) == ErrorKind::kInsufficientData);
}

TEST_CASE("census pair count is n choose 2") {
  Rng rng(3);
  for (std::size_t n = 2; n < 20; ++n) {
    std::vector<Fingerprint> fps;
    for (std::size_t i = 0; i < n; ++i) fps.push_back(random_fingerprint(rng, Layout{3, 2}, {}, 9));
    std::vector<CensusEntry> e;
    for (std::size_t i = 0; i < n; ++i) e.push_back({DeviceId{i % 3}, &fps[i]});
    CHECK(distance_census(e).size() == n * (n - 1) / 2);
  }
}

TEST_CASE("elementwise normalisation centres every column") {
  std::vector<Fingerprint> g{fp({1, 10}), fp({3, 20}), fp({5, 60})};
  const auto out = normalize_elementwise(g);
  REQUIRE(out.size() == 3);
  CHECK(out[0][0] == doctest::Approx(-2.0));
  CHECK(out[2][1] == doctest::Approx(30.0));
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0;
    for (const auto& row : out) s += row[j];
    CHECK(s == doctest::Approx(0.0));
  }
  CHECK(kind_of([] { normalize_elementwise({}); }) == ErrorKind::kDimension);
}
