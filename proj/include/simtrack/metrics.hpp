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

// Tracking evaluation: CLEAR-MOT, identity F1 and HOTA, per class and
// aggregated.

#pragma once

#include "simtrack/geometry.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace simtrack::metrics {

struct TrackObject {
  int id = 0;
  int class_id = 0;
  BoundingBox box;
  bool visible = true;  // ground truth only: invisible boxes are ignore regions
};

/// Objects keyed by frame index.
struct TrackSet {
  std::map<int, std::vector<TrackObject>> frames;

  void add(int frame, const TrackObject& obj) { frames[frame].push_back(obj); }
  std::size_t size() const;
  TrackSet of_class(int class_id) const;
};

struct ClearMot {
  double mota = 0.0;
  double motp = 0.0;  // mean IoU of matched pairs
  long fp = 0;
  long fn = 0;
  long idsw = 0;
  long mt = 0;
  long ml = 0;
  long gt_objects = 0;
  long matches = 0;
  long gt_tracks = 0;
};

struct IdScores {
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
};

inline constexpr int kHotaAlphas = 19;  // 0.05, 0.10, ..., 0.95

struct Hota {
  std::array<double, kHotaAlphas> hota{}, det_a{}, ass_a{}, det_re{}, det_pr{}, ass_re{},
      ass_pr{};
  std::array<long, kHotaAlphas> tp{}, fn{}, fp{};
  // Means over the localization thresholds.
  double hota_mean = 0.0, det_a_mean = 0.0, ass_a_mean = 0.0, det_re_mean = 0.0,
         det_pr_mean = 0.0, ass_re_mean = 0.0, ass_pr_mean = 0.0;

  static double alpha(int k) { return 0.05 * (k + 1); }
  /// Recomputes the derived ratios and means from tp/fn/fp and ass_*.
  void finish();
};

/// CLEAR-MOT with match persistence: correspondences of the previous frame
/// that still reach `iou_threshold` are kept, the rest are assigned to
/// maximize the number of matches and then total IoU. Throws
/// std::invalid_argument when there are no visible ground-truth objects.
ClearMot clear_mot(const TrackSet& gt, const TrackSet& pred, double iou_threshold = 0.5);

/// Identity F1 from an optimal one-to-one trajectory assignment.
IdScores idf1(const TrackSet& gt, const TrackSet& pred, double iou_threshold = 0.5);

/// HOTA at every localization threshold and averaged over them.
Hota hota(const TrackSet& gt, const TrackSet& pred);

struct EvalRow {
  int class_id = -1;  // -1 for the aggregate row
  bool has_gt = false;
  ClearMot clear;
  IdScores id;
  Hota hota;
};

struct EvalReport {
  std::vector<EvalRow> classes;
  EvalRow aggregate;
  double mmota = 0.0;
  double midf1 = 0.0;
  double mhota = 0.0;

  std::string to_text() const;
  /// One `key=value` line per metric, keys stable across runs.
  std::string to_key_values() const;
};

/// Evaluates each class separately. Classes without ground truth still
/// contribute their false positives to the aggregate but are left out of the
/// class means. Throws std::invalid_argument when no class has visible
/// ground truth.
EvalReport per_class_report(const TrackSet& gt, const TrackSet& pred,
                            double iou_threshold = 0.5);

/// Single-class report treating every object as class 0.
EvalReport class_agnostic_report(const TrackSet& gt, const TrackSet& pred,
                                 double iou_threshold = 0.5);

/// Drops invisible ground truth and the predictions that match it.
void remove_ignored(TrackSet& gt, TrackSet& pred, double iou_threshold);

}  // namespace simtrack::metrics
