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

#include "simtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

namespace simtrack {

void TrackerConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  };
  unit(beta_obj, "beta_obj");
  unit(beta_match, "beta_match");
  unit(beta_new, "beta_new");
  unit(momentum, "momentum");
  unit(nms_threshold, "nms_threshold");
  if (!std::isfinite(det_confidence)) throw std::invalid_argument("det_confidence must be finite");
  if (memory_frames < 0) throw std::invalid_argument("memory_frames must be >= 0");
  if (backdrop_frames && *backdrop_frames < 0)
    throw std::invalid_argument("backdrop_frames must be >= 0");
  if (distance_gate && !(*distance_gate >= 0.0))
    throw std::invalid_argument("distance_gate must be >= 0");
  if (merge) {
    if (merge->window < 0) throw std::invalid_argument("merge window must be >= 0");
    if (!(merge->max_distance >= 0.0))
      throw std::invalid_argument("merge distance must be >= 0");
  }
}

std::vector<std::string> TrackerConfig::warnings() const {
  std::vector<std::string> w;
  if (beta_new < beta_obj)
    w.emplace_back("beta_new is below beta_obj: unmatched detections that could not match a "
                   "track may still start new tracks");
  return w;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

void Tracker::check_detection(const Detection& d) {
  if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0)
    throw std::invalid_argument("detection score must be finite and within [0, 1]");
  if (!d.embedding.allFinite())
    throw std::invalid_argument("detection embedding has non-finite components");
  if (dim_ < 0) dim_ = d.embedding.size();
  if (d.embedding.size() != dim_)
    throw std::invalid_argument("detection embedding dimension " +
                                std::to_string(d.embedding.size()) + " differs from run dimension " +
                                std::to_string(dim_));
}

std::vector<TrackedDetection> Tracker::step(int frame, std::span<const Detection> detections) {
  if (last_frame_ && frame <= *last_frame_)
    throw std::invalid_argument("frame index " + std::to_string(frame) +
                                " does not follow previous frame " + std::to_string(*last_frame_));
  last_frame_ = frame;
  for (const auto& d : detections) check_detection(d);

  // Confidence floor, then duplicate removal.
  std::vector<std::size_t> confident;
  std::vector<ScoredBox<double>> scored;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].score < cfg_.det_confidence) continue;
    confident.push_back(i);
    scored.push_back({detections[i].box, detections[i].score, detections[i].class_id});
  }
  std::vector<std::size_t> order;
  for (std::size_t k : nms<double>(scored, cfg_.nms_threshold, cfg_.duplicate_removal))
    order.push_back(confident[k]);

  // Matching candidates: recent tracks, then recent backdrops.
  std::vector<std::size_t> cand_tracks;
  for (std::size_t t = 0; t < live_.size(); ++t)
    if (frame - live_[t].last_active_frame <= cfg_.memory_frames) cand_tracks.push_back(t);
  std::vector<std::size_t> cand_backdrops;
  if (cfg_.backdrop_frames) {
    for (std::size_t b = 0; b < backdrops_.size(); ++b)
      if (frame - backdrops_[b].frame <= *cfg_.backdrop_frames) cand_backdrops.push_back(b);
  }

  const auto n = static_cast<Eigen::Index>(order.size());
  const auto n_tracks = static_cast<Eigen::Index>(cand_tracks.size());
  const auto m = n_tracks + static_cast<Eigen::Index>(cand_backdrops.size());

  Eigen::MatrixXd scores;
  AdmissibleMask admissible;
  if (n > 0 && m > 0) {
    Eigen::MatrixXd dets(n, dim_);
    Eigen::MatrixXd cands(m, dim_);
    for (Eigen::Index i = 0; i < n; ++i)
      dets.row(i) = detections[order[static_cast<std::size_t>(i)]].embedding.transpose();
    std::vector<const BoundingBox*> cand_box(static_cast<std::size_t>(m));
    std::vector<int> cand_class(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (j < n_tracks) {
        const Track& t = live_[cand_tracks[uj]];
        cands.row(j) = t.embedding.transpose();
        cand_box[uj] = &t.last_box;
        cand_class[uj] = t.class_id;
      } else {
        const Backdrop& b = backdrops_[cand_backdrops[uj - cand_tracks.size()]];
        cands.row(j) = b.embedding.transpose();
        cand_box[uj] = &b.box;
        cand_class[uj] = b.class_id;
      }
    }

    admissible = AdmissibleMask::Constant(n, m, true);
    if (cfg_.same_class_only || cfg_.distance_gate) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Detection& d = detections[order[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < m; ++j) {
          const auto uj = static_cast<std::size_t>(j);
          if (cfg_.same_class_only && d.class_id != cand_class[uj]) admissible(i, j) = false;
          if (cfg_.distance_gate && center_distance(d.box, *cand_box[uj]) > *cfg_.distance_gate)
            admissible(i, j) = false;
        }
      }
    }

    if (cfg_.metric == SimilarityMetric::bisoftmax) {
      const Eigen::MatrixXd logits = dets * cands.transpose();
      scores = bisoftmax_from_logits(logits, &admissible).score;
    } else {
      scores = cosine_matrix(dets, cands);
    }
  }

  std::vector<char> claimed(static_cast<std::size_t>(n_tracks), 0);
  std::vector<TrackedDetection> out;
  std::vector<Backdrop> fresh_backdrops;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Detection& d = detections[order[static_cast<std::size_t>(i)]];
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index best_j = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!admissible(i, j)) continue;
      if (scores(i, j) > best) {
        best = scores(i, j);
        best_j = j;
      }
    }

    const bool is_track = best_j >= 0 && best_j < n_tracks;
    if (best > cfg_.beta_match && d.score > cfg_.beta_obj && is_track &&
        !claimed[static_cast<std::size_t>(best_j)]) {
      claimed[static_cast<std::size_t>(best_j)] = 1;
      Track& t = live_[cand_tracks[static_cast<std::size_t>(best_j)]];
      t.embedding = momentum_update(t.embedding, d.embedding, cfg_.momentum);
      t.last_box = d.box;
      t.last_active_frame = frame;
      t.history.push_back({frame, d.box, d.score, false});
      out.push_back({t.track_id, d});
    } else if (d.score > cfg_.beta_new) {
      Track t;
      t.track_id = next_id_++;
      t.class_id = d.class_id;
      t.embedding = d.embedding;
      t.last_box = d.box;
      t.last_active_frame = frame;
      t.created_frame = frame;
      t.history.push_back({frame, d.box, d.score, false});
      out.push_back({t.track_id, d});
      live_.push_back(std::move(t));
    } else if (cfg_.backdrop_frames) {
      fresh_backdrops.push_back({d.embedding, d.box, d.class_id, frame});
    }
  }
  for (auto& b : fresh_backdrops) backdrops_.push_back(std::move(b));

  // Expiry.
  if (cfg_.backdrop_frames) {
    const int keep = *cfg_.backdrop_frames;
    std::erase_if(backdrops_, [&](const Backdrop& b) { return frame - b.frame > keep; });
  }
  auto stale = [&](const Track& t) { return frame - t.last_active_frame > cfg_.memory_frames; };
  std::vector<Track> still_live;
  for (auto& t : live_) (stale(t) ? expired_ : still_live).push_back(std::move(t));
  live_ = std::move(still_live);

  if (cfg_.merge) merge_tracklets(*cfg_.merge);

  std::sort(out.begin(), out.end(),
            [](const TrackedDetection& a, const TrackedDetection& b) { return a.track_id < b.track_id; });
  return out;
}

void Tracker::merge_tracklets(const MergeConfig& merge) {
  if (!last_frame_ || live_.empty()) return;
  const int now = *last_frame_;

  std::vector<std::size_t> young, vanished;
  for (std::size_t t = 0; t < live_.size(); ++t) {
    if (now - live_[t].created_frame < merge.window) young.push_back(t);
    if (live_[t].last_active_frame < now) vanished.push_back(t);
  }
  if (young.empty() || vanished.empty()) return;

  const auto ny = static_cast<Eigen::Index>(young.size());
  const auto nv = static_cast<Eigen::Index>(vanished.size());
  Eigen::MatrixXd ye(ny, dim_), ve(nv, dim_);
  AdmissibleMask admissible(ny, nv);
  for (Eigen::Index i = 0; i < ny; ++i) {
    const Track& y = live_[young[static_cast<std::size_t>(i)]];
    ye.row(i) = y.embedding.transpose();
    for (Eigen::Index j = 0; j < nv; ++j) {
      const Track& v = live_[vanished[static_cast<std::size_t>(j)]];
      if (i == 0) ve.row(j) = v.embedding.transpose();
      admissible(i, j) = v.last_active_frame < y.created_frame &&
                         (!cfg_.same_class_only || v.class_id == y.class_id) &&
                         center_distance(y.history.front().box, v.last_box) <= merge.max_distance;
    }
  }
  if (!admissible.any()) return;
  const Eigen::MatrixXd logits = ye * ve.transpose();
  const Eigen::MatrixXd f = bisoftmax_from_logits(logits, &admissible).score;

  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < ny; ++i)
    for (Eigen::Index j = 0; j < nv; ++j)
      if (admissible(i, j) && f(i, j) > merge.threshold) pairs.emplace_back(f(i, j), i, j);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });

  std::vector<char> young_used(young.size(), 0), vanished_used(vanished.size(), 0);
  std::vector<char> drop(live_.size(), 0);
  for (const auto& [score, i, j] : pairs) {
    const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
    if (young_used[ui] || vanished_used[uj]) continue;
    young_used[ui] = vanished_used[uj] = 1;
    Track& y = live_[young[ui]];
    Track& v = live_[vanished[uj]];
    v.history.insert(v.history.end(), y.history.begin(), y.history.end());
    v.embedding = y.embedding;
    v.last_box = y.last_box;
    v.last_active_frame = y.last_active_frame;
    drop[young[ui]] = 1;
  }
  std::vector<Track> kept;
  for (std::size_t t = 0; t < live_.size(); ++t)
    if (!drop[t]) kept.push_back(std::move(live_[t]));
  live_ = std::move(kept);
}

std::vector<TrackHistory> Tracker::histories() const {
  std::vector<TrackHistory> out;
  for (const auto* pool : {&live_, &expired_})
    for (const Track& t : *pool) out.push_back({t.track_id, t.class_id, t.history});
  std::sort(out.begin(), out.end(),
            [](const TrackHistory& a, const TrackHistory& b) { return a.track_id < b.track_id; });
  return out;
}

std::vector<TrackHistory> interpolate_tracks(std::vector<TrackHistory> histories) {
  for (auto& h : histories) {
    std::vector<HistoryEntry> filled;
    filled.reserve(h.entries.size());
    for (std::size_t e = 0; e < h.entries.size(); ++e) {
      if (e > 0) {
        const HistoryEntry& a = h.entries[e - 1];
        const HistoryEntry& b = h.entries[e];
        const int gap = b.frame - a.frame;
        for (int f = a.frame + 1; f < b.frame; ++f) {
          const double t = static_cast<double>(f - a.frame) / gap;
          filled.push_back({f, lerp(a.box, b.box, t), 0.5 * (a.score + b.score), true});
        }
      }
      filled.push_back(h.entries[e]);
    }
    h.entries = std::move(filled);
  }
  return histories;
}

std::vector<TrackHistory> finalize(const Tracker& tracker) {
  auto h = tracker.histories();
  if (tracker.config().interpolate) h = interpolate_tracks(std::move(h));
  return h;
}

}  // namespace simtrack
