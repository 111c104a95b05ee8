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

// Axis-aligned box arithmetic and greedy non-maximum suppression.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simtrack {

/// Axis-aligned box in continuous image coordinates (origin top-left).
/// Width is x2 - x1 with no "+1" pixel convention. Zero-area boxes are
/// allowed; negative extents are rejected at construction.
template <typename Scalar>
class Box {
 public:
  Box() = default;
  Box(Scalar x1, Scalar y1, Scalar x2, Scalar y2)
      : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    if (!(x2 >= x1) || !(y2 >= y1)) {
      throw std::invalid_argument("box has negative extent: [" +
                                  std::to_string(x1) + "," + std::to_string(y1) + "," +
                                  std::to_string(x2) + "," + std::to_string(y2) + "]");
    }
  }

  static Box from_xywh(Scalar x, Scalar y, Scalar w, Scalar h) {
    return Box(x, y, x + w, y + h);
  }

  Scalar x1() const { return x1_; }
  Scalar y1() const { return y1_; }
  Scalar x2() const { return x2_; }
  Scalar y2() const { return y2_; }
  Scalar width() const { return x2_ - x1_; }
  Scalar height() const { return y2_ - y1_; }
  Scalar area() const { return width() * height(); }
  Scalar center_x() const { return (x1_ + x2_) / Scalar(2); }
  Scalar center_y() const { return (y1_ + y2_) / Scalar(2); }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  Scalar x1_{0}, y1_{0}, x2_{0}, y2_{0};
};

using BoundingBox = Box<double>;

template <typename Scalar>
Scalar intersection_area(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const Scalar h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (w <= Scalar(0) || h <= Scalar(0)) return Scalar(0);
  return w * h;
}

/// Intersection over union; 0 when the union is empty.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  if (uni <= Scalar(0)) return Scalar(0);
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar center_distance(const Box<Scalar>& a, const Box<Scalar>& b) {
  return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

/// Componentwise (1 - t) * a + t * b.
template <typename Scalar>
Box<Scalar> lerp(const Box<Scalar>& a, const Box<Scalar>& b, Scalar t) {
  auto mix = [t](Scalar u, Scalar v) { return u + t * (v - u); };
  return Box<Scalar>(mix(a.x1(), b.x1()), mix(a.y1(), b.y1()), mix(a.x2(), b.x2()),
                     mix(a.y2(), b.y2()));
}

template <typename Scalar>
struct ScoredBox {
  Box<Scalar> box;
  Scalar score{0};
  int class_id{0};
};

/// Greedy NMS. Returns kept input indices in descending score order; equal
/// scores keep input order. A box is suppressed when its IoU with an already
/// kept box is strictly above `iou_threshold`. With `class_agnostic` false the
/// comparison only runs between boxes of the same class.
template <typename Scalar>
std::vector<std::size_t> nms(std::span<const ScoredBox<Scalar>> dets, Scalar iou_threshold,
                             bool class_agnostic) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const auto& cand = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      if (!class_agnostic && dets[k].class_id != cand.class_id) return false;
      return iou(dets[k].box, cand.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

}  // namespace simtrack
