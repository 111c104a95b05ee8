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

// Appearance-only online tracker: duplicate removal, bi-directional softmax
// association against live tracks and backdrops, and track management.

#pragma once

#include "simtrack/geometry.hpp"
#include "simtrack/similarity.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simtrack {

struct Detection {
  BoundingBox box;
  int class_id = 0;
  double score = 0.0;
  Embedding embedding;
};

enum class SimilarityMetric { bisoftmax, cosine };

/// Near-online tracklet merging: a track younger than `window` frames is
/// relabeled to a vanished track when their bi-softmax score exceeds
/// `threshold` and their boxes are within `max_distance` pixels.
struct MergeConfig {
  int window = 10;
  double threshold = 0.5;
  double max_distance = 50.0;
};

struct TrackerConfig {
  double beta_obj = 0.35;
  double beta_match = 0.5;
  double beta_new = 0.5;
  int memory_frames = 10;                 // K: frames an inactive track stays matchable
  std::optional<int> backdrop_frames = 1;  // L; nullopt disables backdrops
  double momentum = 0.8;
  double nms_threshold = 0.65;
  double det_confidence = 0.1;
  bool same_class_only = true;
  bool duplicate_removal = true;  // class-agnostic NMS; intra-class otherwise
  SimilarityMetric metric = SimilarityMetric::bisoftmax;
  std::optional<double> distance_gate;
  std::optional<MergeConfig> merge;
  bool interpolate = false;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  /// Non-fatal oddities, e.g. beta_new below beta_obj.
  std::vector<std::string> warnings() const;
};

struct HistoryEntry {
  int frame = 0;
  BoundingBox box;
  double score = 0.0;
  bool interpolated = false;
};

struct Track {
  int track_id = 0;
  int class_id = 0;
  Embedding embedding;
  BoundingBox last_box;
  int last_active_frame = 0;
  int created_frame = 0;
  std::vector<HistoryEntry> history;
};

struct Backdrop {
  Embedding embedding;
  BoundingBox box;
  int class_id = 0;
  int frame = 0;
};

struct TrackedDetection {
  int track_id = 0;
  Detection detection;
};

struct TrackHistory {
  int track_id = 0;
  int class_id = 0;
  std::vector<HistoryEntry> entries;
};

/// m * fresh + (1 - m) * old, componentwise, without renormalization.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1> momentum_update(
    const Eigen::MatrixBase<DerivedA>& old, const Eigen::MatrixBase<DerivedB>& fresh,
    typename DerivedA::Scalar m) {
  if (old.size() != fresh.size())
    throw std::invalid_argument("momentum_update: embedding dimensions differ");
  using Scalar = typename DerivedA::Scalar;
  if (m == Scalar(1)) return fresh;
  if (m == Scalar(0)) return old;
  return m * fresh + (Scalar(1) - m) * old;
}

class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg);

  /// Processes one frame and returns the confirmed (track, detection) pairs,
  /// sorted by track id. Frame indices must strictly increase.
  std::vector<TrackedDetection> step(int frame, std::span<const Detection> detections);

  /// Relabels young tracks to matching vanished tracks (see MergeConfig).
  /// Runs automatically at the end of every step when configured.
  void merge_tracklets(const MergeConfig& merge);

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Track>& tracks() const { return live_; }
  const std::vector<Backdrop>& backdrops() const { return backdrops_; }
  std::optional<int> last_frame() const { return last_frame_; }

  /// Every track that ever existed (live and expired, minus those merged
  /// away), sorted by id.
  std::vector<TrackHistory> histories() const;

 private:
  void check_detection(const Detection& d);

  TrackerConfig cfg_;
  std::vector<Track> live_;
  std::vector<Track> expired_;
  std::vector<Backdrop> backdrops_;
  int next_id_ = 1;
  std::optional<int> last_frame_;
  Eigen::Index dim_ = -1;
};

/// Fills frame gaps inside each track with linearly interpolated boxes.
std::vector<TrackHistory> interpolate_tracks(std::vector<TrackHistory> histories);

/// Track histories after the configured post-processing (interpolation).
std::vector<TrackHistory> finalize(const Tracker& tracker);

}  // namespace simtrack
