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

#include "simtrack/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

namespace simtrack::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(long line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view s, long line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(line, "expected a real number, got '" + std::string(s) + "'");
  if (!std::isfinite(v)) fail(line, "non-finite value '" + std::string(s) + "'");
  return v;
}

int parse_int(std::string_view s, long line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(line, "expected an integer, got '" + std::string(s) + "'");
  return v;
}

// Parses "# <magic> v1 dim=<D>".
int parse_header(std::string_view line, std::string_view magic, long line_no) {
  const std::string prefix = "# " + std::string(magic) + " v1 dim=";
  if (line.substr(0, prefix.size()) != prefix)
    fail(line_no, "missing header '" + prefix + "<D>'");
  const int dim = parse_int(trim(line.substr(prefix.size())), line_no);
  if (dim < 0) fail(line_no, "negative embedding dimension");
  return dim;
}

bool blank(std::string_view s) { return trim(s).empty(); }

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_detections(std::ostream& os, const DetectionFile& file) {
  os << "# simtrack-detections v1 dim=" << file.dim << "\n";
  for (const auto& r : file.records) {
    if (static_cast<int>(r.embedding.size()) != file.dim)
      throw DataError("detection record embedding does not match declared dimension");
    os << r.frame << ',' << r.class_id << ',' << format_real(r.score) << ',' << format_real(r.x1)
       << ',' << format_real(r.y1) << ',' << format_real(r.x2) << ',' << format_real(r.y2);
    for (double e : r.embedding) os << ',' << format_real(e);
    os << '\n';
  }
}

DetectionFile read_detections(std::istream& is) {
  DetectionFile file;
  std::string line;
  long line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (!have_header) {
      file.dim = parse_header(trim(line), "simtrack-detections", line_no);
      have_header = true;
      continue;
    }
    if (trim(line).front() == '#') continue;
    const auto f = split(line);
    if (f.size() != static_cast<std::size_t>(7 + file.dim))
      fail(line_no, "expected " + std::to_string(7 + file.dim) + " fields, got " +
                        std::to_string(f.size()) + " (embedding dimension mismatch?)");
    DetectionRecord r;
    r.frame = parse_int(f[0], line_no);
    r.class_id = parse_int(f[1], line_no);
    r.score = parse_real(f[2], line_no);
    r.x1 = parse_real(f[3], line_no);
    r.y1 = parse_real(f[4], line_no);
    r.x2 = parse_real(f[5], line_no);
    r.y2 = parse_real(f[6], line_no);
    if (!(r.x2 >= r.x1) || !(r.y2 >= r.y1)) fail(line_no, "box has negative extent");
    if (!(r.score >= 0.0 && r.score <= 1.0)) fail(line_no, "score outside [0, 1]");
    r.embedding.reserve(static_cast<std::size_t>(file.dim));
    for (int k = 0; k < file.dim; ++k) r.embedding.push_back(parse_real(f[7 + k], line_no));
    if (!file.records.empty() && r.frame < file.records.back().frame)
      fail(line_no, "frame indices must be non-decreasing");
    file.records.push_back(std::move(r));
  }
  return file;
}

Detection to_detection(const DetectionRecord& r) {
  Detection d;
  d.box = BoundingBox(r.x1, r.y1, r.x2, r.y2);
  d.class_id = r.class_id;
  d.score = r.score;
  d.embedding = Eigen::Map<const Eigen::VectorXd>(r.embedding.data(),
                                                  static_cast<Eigen::Index>(r.embedding.size()));
  return d;
}

DetectionRecord to_record(int frame, const Detection& d) {
  DetectionRecord r;
  r.frame = frame;
  r.class_id = d.class_id;
  r.score = d.score;
  r.x1 = d.box.x1();
  r.y1 = d.box.y1();
  r.x2 = d.box.x2();
  r.y2 = d.box.y2();
  r.embedding.assign(d.embedding.data(), d.embedding.data() + d.embedding.size());
  return r;
}

DetectionFile scenario_detections(const synth::Scenario& scenario) {
  DetectionFile file;
  file.dim = scenario.dim;
  for (int f = 0; f < scenario.frame_count; ++f)
    for (const auto& d : scenario.detections[static_cast<std::size_t>(f)])
      file.records.push_back(to_record(f, d));
  return file;
}

std::map<int, std::vector<Detection>> group_by_frame(const DetectionFile& file) {
  std::map<int, std::vector<Detection>> out;
  for (const auto& r : file.records) out[r.frame].push_back(to_detection(r));
  return out;
}

void write_mot(std::ostream& os, const std::vector<MotRecord>& rows) {
  for (const auto& r : rows) {
    os << r.frame << ',' << r.id << ',' << format_real(r.x) << ',' << format_real(r.y) << ','
       << format_real(r.w) << ',' << format_real(r.h) << ',' << format_real(r.conf) << ','
       << r.class_id << ',' << format_real(r.visibility) << '\n';
  }
}

std::vector<MotRecord> read_mot(std::istream& is) {
  std::vector<MotRecord> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (blank(line) || trim(line).front() == '#') continue;
    const auto f = split(line);
    if (f.size() != 9) fail(line_no, "expected 9 fields, got " + std::to_string(f.size()));
    MotRecord r;
    r.frame = parse_int(f[0], line_no);
    r.id = parse_int(f[1], line_no);
    r.x = parse_real(f[2], line_no);
    r.y = parse_real(f[3], line_no);
    r.w = parse_real(f[4], line_no);
    r.h = parse_real(f[5], line_no);
    r.conf = parse_real(f[6], line_no);
    r.class_id = parse_int(f[7], line_no);
    r.visibility = parse_real(f[8], line_no);
    if (!(r.w >= 0.0) || !(r.h >= 0.0)) fail(line_no, "negative width or height");
    rows.push_back(r);
  }
  return rows;
}

metrics::TrackSet to_track_set(const std::vector<MotRecord>& rows) {
  metrics::TrackSet set;
  for (const auto& r : rows) {
    set.add(r.frame, {r.id, r.class_id, BoundingBox::from_xywh(r.x, r.y, r.w, r.h),
                      r.conf > 0.0 && r.visibility > 0.0});
  }
  for (const auto& [frame, objs] : set.frames) {
    std::vector<int> ids;
    for (const auto& o : objs) ids.push_back(o.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw DataError("frame " + std::to_string(frame) + " repeats an object id");
  }
  return set;
}

std::vector<MotRecord> to_mot(const metrics::TrackSet& set) {
  std::vector<MotRecord> rows;
  for (const auto& [frame, objs] : set.frames)
    for (const auto& o : objs) {
      const double flag = o.visible ? 1.0 : 0.0;
      rows.push_back({frame, o.id, o.box.x1(), o.box.y1(), o.box.width(), o.box.height(), flag,
                      o.class_id, flag});
    }
  return rows;
}

std::vector<MotRecord> to_mot(const std::vector<TrackHistory>& histories) {
  std::vector<MotRecord> rows;
  for (const auto& h : histories)
    for (const auto& e : h.entries)
      rows.push_back({e.frame, h.track_id, e.box.x1(), e.box.y1(), e.box.width(), e.box.height(),
                      e.score, h.class_id, 1.0});
  std::stable_sort(rows.begin(), rows.end(), [](const MotRecord& a, const MotRecord& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  return rows;
}

void write_batch(std::ostream& os, const BatchDump& dump) {
  const auto& b = dump.batch;
  if (dump.key_emb.rows() != static_cast<Eigen::Index>(b.key.size()) ||
      dump.ref_emb.rows() != static_cast<Eigen::Index>(b.ref.size()) ||
      dump.key_emb.cols() != dump.ref_emb.cols())
    throw DataError("batch dump: embeddings do not match samples");
  os << "# simtrack-batch v1 dim=" << dump.key_emb.cols() << "\n";
  auto row = [&](const char* tag, const contrastive::RegionSample& s, const auto& emb) {
    const char* pol = s.polarity == contrastive::Polarity::positive   ? "pos"
                      : s.polarity == contrastive::Polarity::negative ? "neg"
                                                                      : "ign";
    os << tag << ',' << format_real(s.box.x1()) << ',' << format_real(s.box.y1()) << ','
       << format_real(s.box.x2()) << ',' << format_real(s.box.y2()) << ','
       << (s.identity ? *s.identity : -1) << ',' << pol << ',' << format_real(s.max_iou);
    for (Eigen::Index k = 0; k < emb.size(); ++k) os << ',' << format_real(emb(k));
    os << '\n';
  };
  for (std::size_t i = 0; i < b.key.size(); ++i)
    row("key", b.key[i], dump.key_emb.row(static_cast<Eigen::Index>(i)));
  for (std::size_t j = 0; j < b.ref.size(); ++j)
    row("ref", b.ref[j], dump.ref_emb.row(static_cast<Eigen::Index>(j)));
}

BatchDump read_batch(std::istream& is) {
  std::string line;
  long line_no = 0;
  int dim = -1;
  std::vector<std::vector<double>> key_rows, ref_rows;
  BatchDump dump;
  while (std::getline(is, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (dim < 0) {
      dim = parse_header(trim(line), "simtrack-batch", line_no);
      continue;
    }
    const auto f = split(line);
    if (f.size() != static_cast<std::size_t>(8 + dim))
      fail(line_no, "expected " + std::to_string(8 + dim) + " fields");
    contrastive::RegionSample s;
    const double x1 = parse_real(f[1], line_no), y1 = parse_real(f[2], line_no);
    const double x2 = parse_real(f[3], line_no), y2 = parse_real(f[4], line_no);
    if (!(x2 >= x1) || !(y2 >= y1)) fail(line_no, "box has negative extent");
    s.box = BoundingBox(x1, y1, x2, y2);
    const int identity = parse_int(f[5], line_no);
    if (identity >= 0) s.identity = identity;
    if (f[6] == "pos") s.polarity = contrastive::Polarity::positive;
    else if (f[6] == "neg") s.polarity = contrastive::Polarity::negative;
    else if (f[6] == "ign") s.polarity = contrastive::Polarity::ignored;
    else fail(line_no, "unknown polarity '" + std::string(f[6]) + "'");
    s.max_iou = parse_real(f[7], line_no);
    std::vector<double> e;
    for (int k = 0; k < dim; ++k) e.push_back(parse_real(f[8 + k], line_no));
    if (f[0] == "key") {
      dump.batch.key.push_back(s);
      key_rows.push_back(std::move(e));
    } else if (f[0] == "ref") {
      dump.batch.ref.push_back(s);
      ref_rows.push_back(std::move(e));
    } else {
      fail(line_no, "unknown frame tag '" + std::string(f[0]) + "'");
    }
  }
  if (dim < 0) throw DataError("batch dump: missing header");
  auto to_matrix = [dim](const std::vector<std::vector<double>>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (int c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    return m;
  };
  dump.key_emb = to_matrix(key_rows);
  dump.ref_emb = to_matrix(ref_rows);
  dump.batch.key_source.resize(dump.batch.key.size());
  dump.batch.ref_source.resize(dump.batch.ref.size());
  std::iota(dump.batch.key_source.begin(), dump.batch.key_source.end(), std::size_t{0});
  std::iota(dump.batch.ref_source.begin(), dump.batch.ref_source.end(), std::size_t{0});
  dump.batch.positivity = contrastive::positivity_of(dump.batch.key, dump.batch.ref);
  return dump;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace simtrack::io
