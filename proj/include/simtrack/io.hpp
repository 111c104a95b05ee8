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

// Text file formats: detections with embeddings, MOT-style track rows and
// contrastive batch dumps. Reals are written in shortest round-trip form.

#pragma once

#include "simtrack/contrastive.hpp"
#include "simtrack/metrics.hpp"
#include "simtrack/synth.hpp"
#include "simtrack/tracker.hpp"

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace simtrack::io {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_real(double v);

// --- detections ------------------------------------------------------------
//
//   # simtrack-detections v1 dim=<D>
//   frame,class_id,score,x1,y1,x2,y2,e_0,...,e_{D-1}

struct DetectionRecord {
  int frame = 0;
  int class_id = 0;
  double score = 0.0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  std::vector<double> embedding;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

struct DetectionFile {
  int dim = 0;
  std::vector<DetectionRecord> records;
};

void write_detections(std::ostream& os, const DetectionFile& file);
DetectionFile read_detections(std::istream& is);

Detection to_detection(const DetectionRecord& r);
DetectionRecord to_record(int frame, const Detection& d);
DetectionFile scenario_detections(const synth::Scenario& scenario);

/// Detections grouped by frame, in file order.
std::map<int, std::vector<Detection>> group_by_frame(const DetectionFile& file);

// --- MOT rows ----------------------------------------------------------------
//
//   frame,id,x,y,w,h,conf,class_id,visibility

struct MotRecord {
  int frame = 0;
  int id = 0;
  double x = 0, y = 0, w = 0, h = 0;
  double conf = 1.0;
  int class_id = 0;
  double visibility = 1.0;

  friend bool operator==(const MotRecord&, const MotRecord&) = default;
};

void write_mot(std::ostream& os, const std::vector<MotRecord>& rows);
std::vector<MotRecord> read_mot(std::istream& is);

/// A row counts as visible ground truth when conf > 0 and visibility > 0.
metrics::TrackSet to_track_set(const std::vector<MotRecord>& rows);
std::vector<MotRecord> to_mot(const metrics::TrackSet& set);
std::vector<MotRecord> to_mot(const std::vector<TrackHistory>& histories);

// --- contrastive batch dumps ---------------------------------------------------
//
//   # simtrack-batch v1 dim=<D>
//   key|ref,x1,y1,x2,y2,identity,pos|neg|ign,max_iou,e_0,...,e_{D-1}
// identity is -1 when absent.

struct BatchDump {
  contrastive::SampleBatch batch;
  Eigen::MatrixXd key_emb;
  Eigen::MatrixXd ref_emb;
};

void write_batch(std::ostream& os, const BatchDump& dump);
BatchDump read_batch(std::istream& is);

// --- files -------------------------------------------------------------------

std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace simtrack::io
