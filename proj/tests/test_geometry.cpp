// Copyright 2026 The simtrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simtrack/geometry.hpp"

#include <random>
#include <vector>

using simtrack::BoundingBox;
using Scored = simtrack::ScoredBox<double>;

namespace {

BoundingBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, 50.0), ext(0.0, 30.0);
  const double x = pos(rng), y = pos(rng);
  return BoundingBox(x, y, x + ext(rng), y + ext(rng));
}

std::vector<std::size_t> run_nms(const std::vector<Scored>& d, double thr, bool agnostic) {
  return simtrack::nms(std::span<const Scored>(d), thr, agnostic);
}

}  // namespace

TEST_CASE("box construction rejects negative extents") {
  CHECK_THROWS_AS(BoundingBox(0, 0, -1, 5), std::invalid_argument);
  CHECK_THROWS_AS(BoundingBox(0, 3, 1, 2), std::invalid_argument);
  CHECK_NOTHROW(BoundingBox(2, 2, 2, 2));
  const auto b = BoundingBox::from_xywh(1, 2, 3, 4);
  CHECK(b.x2() == 4);
  CHECK(b.y2() == 6);
  CHECK(b.area() == 12);
}

TEST_CASE("iou examples") {
  const BoundingBox a(0, 0, 10, 10);
  CHECK(simtrack::iou(a, a) == 1.0);
  CHECK(simtrack::iou(a, BoundingBox(5, 0, 15, 10)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(simtrack::iou(BoundingBox(0, 0, 1, 1), BoundingBox(5, 5, 6, 6)) == 0.0);
  // Both degenerate: union is empty.
  CHECK(simtrack::iou(BoundingBox(1, 1, 1, 1), BoundingBox(1, 1, 1, 1)) == 0.0);
  CHECK(simtrack::iou(BoundingBox(0, 0, 0, 5), BoundingBox(0, 0, 3, 5)) == 0.0);
}

TEST_CASE("iou properties on random pairs") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 2000; ++t) {
    const auto a = random_box(rng), b = random_box(rng);
    const double ab = simtrack::iou(a, b);
    CHECK(ab == simtrack::iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (a.area() > 0) CHECK(simtrack::iou(a, a) == 1.0);
    // Oracle: inclusion-exclusion on the overlap rectangle.
    const double iw = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
    const double ih = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
    const double u = a.area() + b.area() - iw * ih;
    const double expect = u > 0 ? iw * ih / u : 0.0;
    CHECK(ab == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("center distance examples") {
  const BoundingBox a(0, 0, 10, 10);
  CHECK(simtrack::center_distance(a, a) == 0.0);
  CHECK(simtrack::center_distance(a, BoundingBox(10, 0, 20, 10)) == 10.0);
  CHECK(simtrack::center_distance(BoundingBox(0, 0, 2, 2), BoundingBox(0, 0, 2, 8)) == 3.0);
}

TEST_CASE("lerp interpolates corners") {
  const auto m = simtrack::lerp(BoundingBox(0, 0, 10, 10), BoundingBox(10, 20, 30, 40), 0.5);
  CHECK(m == BoundingBox(5, 10, 20, 25));
}

TEST_CASE("nms examples") {
  // Two boxes with IoU 0.8: [0,0,10,10] and [0,0,10,8].
  const BoundingBox a(0, 0, 10, 10), b(0, 0, 10, 8);
  REQUIRE(simtrack::iou(a, b) == doctest::Approx(0.8));
  CHECK(run_nms({{a, 0.9, 0}, {b, 0.8, 0}}, 0.5, false) == std::vector<std::size_t>{0});
  CHECK(run_nms({{a, 0.9, 0}, {b, 0.8, 1}}, 0.5, false) == std::vector<std::size_t>{0, 1});
  CHECK(run_nms({{a, 0.9, 0}, {b, 0.8, 1}}, 0.5, true) == std::vector<std::size_t>{0});
  CHECK(run_nms({{a, 0.3, 0}}, 0.5, true) == std::vector<std::size_t>{0});
  CHECK(run_nms({}, 0.5, true).empty());
}

TEST_CASE("nms breaks score ties by input order") {
  const BoundingBox a(0, 0, 10, 10);
  CHECK(run_nms({{a, 0.5, 0}, {a, 0.5, 0}, {a, 0.5, 0}}, 0.5, true) ==
        std::vector<std::size_t>{0});
  CHECK(run_nms({{BoundingBox(100, 100, 110, 110), 0.5, 0}, {a, 0.5, 0}}, 0.5, true) ==
        std::vector<std::size_t>{0, 1});
}

TEST_CASE("nms properties on random inputs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> score(0.0, 1.0), thr(0.1, 0.9);
  std::uniform_int_distribution<int> cls(0, 2), count(0, 25);
  for (int t = 0; t < 300; ++t) {
    std::vector<Scored> d;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) d.push_back({random_box(rng), score(rng), cls(rng)});
    const double th = thr(rng);
    for (bool agnostic : {false, true}) {
      const auto kept = run_nms(d, th, agnostic);
      // Score-sorted output.
      for (std::size_t k = 1; k < kept.size(); ++k)
        CHECK(d[kept[k - 1]].score >= d[kept[k]].score);
      // No two kept boxes overlap above the threshold.
      for (std::size_t p = 0; p < kept.size(); ++p)
        for (std::size_t q = p + 1; q < kept.size(); ++q) {
          const auto& x = d[kept[p]];
          const auto& y = d[kept[q]];
          if (agnostic || x.class_id == y.class_id) CHECK(simtrack::iou(x.box, y.box) <= th);
        }
      // Every suppressed box is covered by a kept box with at least its score.
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (std::find(kept.begin(), kept.end(), i) != kept.end()) continue;
        bool covered = false;
        for (std::size_t k : kept)
          if ((agnostic || d[k].class_id == d[i].class_id) && d[k].score >= d[i].score &&
              simtrack::iou(d[k].box, d[i].box) > th)
            covered = true;
        CHECK(covered);
      }
      // Idempotent.
      std::vector<Scored> sub;
      for (std::size_t k : kept) sub.push_back(d[k]);
      const auto again = run_nms(sub, th, agnostic);
      CHECK(again.size() == sub.size());
    }
  }
}
