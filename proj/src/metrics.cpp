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

#include "simtrack/metrics.hpp"

#include "simtrack/assignment.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace simtrack::metrics {

namespace {

constexpr double kAlphaEps = std::numeric_limits<double>::epsilon();

const std::vector<TrackObject>& objects_at(const TrackSet& s, int frame) {
  static const std::vector<TrackObject> empty;
  const auto it = s.frames.find(frame);
  return it == s.frames.end() ? empty : it->second;
}

std::set<int> frame_union(const TrackSet& a, const TrackSet& b) {
  std::set<int> frames;
  for (const auto& [f, objs] : a.frames)
    if (!objs.empty()) frames.insert(f);
  for (const auto& [f, objs] : b.frames)
    if (!objs.empty()) frames.insert(f);
  return frames;
}

Eigen::MatrixXd iou_matrix(const std::vector<TrackObject>& g, const std::vector<TrackObject>& p) {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = iou(g[i].box, p[j].box);
  return s;
}

// Matching that maximizes the number of admissible pairs first and the sum of
// `secondary` second. Admissible pairs must have secondary in [0, 1].
std::vector<int> lexicographic_matching(const Eigen::MatrixXd& secondary,
                                        const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& ok) {
  const double bonus = static_cast<double>(secondary.rows() + secondary.cols() + 1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(secondary.rows(), secondary.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (ok(i, j)) w(i, j) = bonus + secondary(i, j);
  return max_weight_matching(w);
}

long total_objects(const TrackSet& s) {
  long n = 0;
  for (const auto& [f, objs] : s.frames) n += static_cast<long>(objs.size());
  return n;
}

void require_gt(const TrackSet& gt) {
  if (total_objects(gt) == 0) throw std::invalid_argument("undefined MOTA denominator: no ground-truth objects");
}

struct Prepared {
  TrackSet gt, pred;
};

Prepared prepare(const TrackSet& gt, const TrackSet& pred, double iou_threshold) {
  Prepared p{gt, pred};
  remove_ignored(p.gt, p.pred, iou_threshold);
  require_gt(p.gt);
  return p;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::size_t TrackSet::size() const { return static_cast<std::size_t>(total_objects(*this)); }

TrackSet TrackSet::of_class(int class_id) const {
  TrackSet out;
  for (const auto& [f, objs] : frames)
    for (const auto& o : objs)
      if (o.class_id == class_id) out.add(f, o);
  return out;
}

void remove_ignored(TrackSet& gt, TrackSet& pred, double iou_threshold) {
  for (auto& [frame, gts] : gt.frames) {
    const bool any_hidden =
        std::any_of(gts.begin(), gts.end(), [](const TrackObject& o) { return !o.visible; });
    if (!any_hidden) continue;
    auto pit = pred.frames.find(frame);
    if (pit != pred.frames.end() && !pit->second.empty()) {
      auto& preds = pit->second;
      const Eigen::MatrixXd s = iou_matrix(gts, preds);
      const auto match = lexicographic_matching(s, s.array() >= iou_threshold);
      std::vector<char> drop(preds.size(), 0);
      for (std::size_t i = 0; i < gts.size(); ++i)
        if (!gts[i].visible && match[i] >= 0) drop[static_cast<std::size_t>(match[i])] = 1;
      std::vector<TrackObject> kept;
      for (std::size_t j = 0; j < preds.size(); ++j)
        if (!drop[j]) kept.push_back(preds[j]);
      preds = std::move(kept);
    }
    std::erase_if(gts, [](const TrackObject& o) { return !o.visible; });
  }
}

ClearMot clear_mot(const TrackSet& gt_in, const TrackSet& pred_in, double iou_threshold) {
  const Prepared data = prepare(gt_in, pred_in, iou_threshold);
  const TrackSet& gt = data.gt;
  const TrackSet& pred = data.pred;

  ClearMot r;
  std::unordered_map<int, int> previous;   // gt id -> pred id, previous frame
  std::unordered_map<int, int> last_seen;  // gt id -> most recent pred id
  std::map<int, std::pair<long, long>> coverage;  // gt id -> (frames, matched)
  double iou_sum = 0.0;

  for (int frame : frame_union(gt, pred)) {
    const auto& g = objects_at(gt, frame);
    const auto& p = objects_at(pred, frame);
    const Eigen::MatrixXd s = iou_matrix(g, p);
    std::vector<int> match(g.size(), -1);
    std::vector<char> pred_used(p.size(), 0);

    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto it = previous.find(g[i].id);
      if (it == previous.end()) continue;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j].id == it->second && !pred_used[j] &&
            s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= iou_threshold) {
          match[i] = static_cast<int>(j);
          pred_used[j] = 1;
          break;
        }
      }
    }

    std::vector<std::size_t> free_g, free_p;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (match[i] < 0) free_g.push_back(i);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (!pred_used[j]) free_p.push_back(j);
    if (!free_g.empty() && !free_p.empty()) {
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(free_g.size()),
                          static_cast<Eigen::Index>(free_p.size()));
      for (std::size_t a = 0; a < free_g.size(); ++a)
        for (std::size_t b = 0; b < free_p.size(); ++b)
          sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              s(static_cast<Eigen::Index>(free_g[a]), static_cast<Eigen::Index>(free_p[b]));
      const auto m = lexicographic_matching(sub, sub.array() >= iou_threshold);
      for (std::size_t a = 0; a < free_g.size(); ++a)
        if (m[a] >= 0) match[free_g[a]] = static_cast<int>(free_p[static_cast<std::size_t>(m[a])]);
    }

    std::unordered_map<int, int> current;
    long matched = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto& cov = coverage[g[i].id];
      ++cov.first;
      if (match[i] < 0) continue;
      const int pid = p[static_cast<std::size_t>(match[i])].id;
      const auto it = last_seen.find(g[i].id);
      if (it != last_seen.end() && it->second != pid) ++r.idsw;
      last_seen[g[i].id] = pid;
      current[g[i].id] = pid;
      ++cov.second;
      ++matched;
      iou_sum += s(static_cast<Eigen::Index>(i), match[i]);
    }
    previous = std::move(current);
    r.matches += matched;
    r.fn += static_cast<long>(g.size()) - matched;
    r.fp += static_cast<long>(p.size()) - matched;
    r.gt_objects += static_cast<long>(g.size());
  }

  for (const auto& [id, cov] : coverage) {
    const double ratio = static_cast<double>(cov.second) / static_cast<double>(cov.first);
    if (ratio >= 0.8) ++r.mt;
    if (ratio <= 0.2) ++r.ml;
  }
  r.gt_tracks = static_cast<long>(coverage.size());
  r.mota = 1.0 - static_cast<double>(r.fn + r.fp + r.idsw) / static_cast<double>(r.gt_objects);
  r.motp = r.matches > 0 ? iou_sum / static_cast<double>(r.matches) : 0.0;
  return r;
}

IdScores idf1(const TrackSet& gt_in, const TrackSet& pred_in, double iou_threshold) {
  const Prepared data = prepare(gt_in, pred_in, iou_threshold);
  const TrackSet& gt = data.gt;
  const TrackSet& pred = data.pred;

  std::map<int, int> gt_index, pred_index;
  for (const auto& [f, objs] : gt.frames)
    for (const auto& o : objs) gt_index.emplace(o.id, 0);
  for (const auto& [f, objs] : pred.frames)
    for (const auto& o : objs) pred_index.emplace(o.id, 0);
  int k = 0;
  for (auto& [id, idx] : gt_index) idx = k++;
  k = 0;
  for (auto& [id, idx] : pred_index) idx = k++;

  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gt_index.size()),
                                                  static_cast<Eigen::Index>(pred_index.size()));
  for (int frame : frame_union(gt, pred)) {
    const auto& g = objects_at(gt, frame);
    const auto& p = objects_at(pred, frame);
    for (const auto& go : g)
      for (const auto& po : p)
        if (iou(go.box, po.box) >= iou_threshold) overlap(gt_index[go.id], pred_index[po.id]) += 1.0;
  }

  IdScores r;
  const auto match = max_weight_matching(overlap);
  for (std::size_t i = 0; i < match.size(); ++i)
    if (match[i] >= 0) r.idtp += static_cast<long>(overlap(static_cast<Eigen::Index>(i), match[i]));
  r.idfn = total_objects(gt) - r.idtp;
  r.idfp = total_objects(pred) - r.idtp;
  const double denom = static_cast<double>(2 * r.idtp + r.idfp + r.idfn);
  r.idf1 = denom > 0.0 ? 2.0 * static_cast<double>(r.idtp) / denom : 0.0;
  r.idp = r.idtp + r.idfp > 0 ? static_cast<double>(r.idtp) / static_cast<double>(r.idtp + r.idfp) : 0.0;
  r.idr = r.idtp + r.idfn > 0 ? static_cast<double>(r.idtp) / static_cast<double>(r.idtp + r.idfn) : 0.0;
  return r;
}

void Hota::finish() {
  for (int a = 0; a < kHotaAlphas; ++a) {
    const double tp_ = static_cast<double>(tp[a]);
    det_re[a] = tp_ / std::max(1.0, tp_ + static_cast<double>(fn[a]));
    det_pr[a] = tp_ / std::max(1.0, tp_ + static_cast<double>(fp[a]));
    det_a[a] = tp_ / std::max(1.0, tp_ + static_cast<double>(fn[a] + fp[a]));
    hota[a] = std::sqrt(det_a[a] * ass_a[a]);
  }
  auto mean = [](const std::array<double, kHotaAlphas>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / kHotaAlphas;
  };
  hota_mean = mean(hota);
  det_a_mean = mean(det_a);
  ass_a_mean = mean(ass_a);
  det_re_mean = mean(det_re);
  det_pr_mean = mean(det_pr);
  ass_re_mean = mean(ass_re);
  ass_pr_mean = mean(ass_pr);
}

Hota hota(const TrackSet& gt_in, const TrackSet& pred_in) {
  const Prepared data = prepare(gt_in, pred_in, 0.5);
  const TrackSet& gt = data.gt;
  const TrackSet& pred = data.pred;

  std::map<int, int> gt_index, pred_index;
  for (const auto& [f, objs] : gt.frames)
    for (const auto& o : objs) gt_index.emplace(o.id, 0);
  for (const auto& [f, objs] : pred.frames)
    for (const auto& o : objs) pred_index.emplace(o.id, 0);
  int k = 0;
  for (auto& [id, idx] : gt_index) idx = k++;
  k = 0;
  for (auto& [id, idx] : pred_index) idx = k++;
  const auto ng = static_cast<Eigen::Index>(gt_index.size());
  const auto np = static_cast<Eigen::Index>(pred_index.size());

  Eigen::VectorXd gt_count = Eigen::VectorXd::Zero(ng), pred_count = Eigen::VectorXd::Zero(np);
  Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(ng, np);
  const std::set<int> frames = frame_union(gt, pred);

  // Global alignment from soft IoU co-occurrence.
  for (int frame : frames) {
    const auto& g = objects_at(gt, frame);
    const auto& p = objects_at(pred, frame);
    for (const auto& o : g) gt_count(gt_index[o.id]) += 1.0;
    for (const auto& o : p) pred_count(pred_index[o.id]) += 1.0;
    if (g.empty() || p.empty()) continue;
    const Eigen::MatrixXd s = iou_matrix(g, p);
    const Eigen::VectorXd row_sum = s.rowwise().sum();
    const Eigen::RowVectorXd col_sum = s.colwise().sum();
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        const double denom = row_sum(i) + col_sum(j) - s(i, j);
        if (denom > kAlphaEps)
          potential(gt_index[g[static_cast<std::size_t>(i)].id],
                    pred_index[p[static_cast<std::size_t>(j)].id]) += s(i, j) / denom;
      }
  }
  Eigen::MatrixXd alignment = Eigen::MatrixXd::Zero(ng, np);
  for (Eigen::Index i = 0; i < ng; ++i)
    for (Eigen::Index j = 0; j < np; ++j)
      alignment(i, j) = potential(i, j) / (gt_count(i) + pred_count(j) - potential(i, j));

  Hota r;
  std::vector<Eigen::MatrixXd> matches(kHotaAlphas, Eigen::MatrixXd::Zero(ng, np));
  for (int frame : frames) {
    const auto& g = objects_at(gt, frame);
    const auto& p = objects_at(pred, frame);
    if (g.empty() || p.empty()) {
      for (int a = 0; a < kHotaAlphas; ++a) {
        r.fn[a] += static_cast<long>(g.size());
        r.fp[a] += static_cast<long>(p.size());
      }
      continue;
    }
    const Eigen::MatrixXd s = iou_matrix(g, p);
    Eigen::MatrixXd secondary(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = 0; j < s.cols(); ++j)
        secondary(i, j) = alignment(gt_index[g[static_cast<std::size_t>(i)].id],
                                    pred_index[p[static_cast<std::size_t>(j)].id]) * s(i, j);
    for (int a = 0; a < kHotaAlphas; ++a) {
      const auto m = lexicographic_matching(secondary, s.array() >= Hota::alpha(a) - kAlphaEps);
      long count = 0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] < 0) continue;
        ++count;
        matches[static_cast<std::size_t>(a)](gt_index[g[i].id],
                                             pred_index[p[static_cast<std::size_t>(m[i])].id]) += 1.0;
      }
      r.tp[a] += count;
      r.fn[a] += static_cast<long>(g.size()) - count;
      r.fp[a] += static_cast<long>(p.size()) - count;
    }
  }

  for (int a = 0; a < kHotaAlphas; ++a) {
    const Eigen::MatrixXd& mc = matches[static_cast<std::size_t>(a)];
    double ass_a = 0.0, ass_re = 0.0, ass_pr = 0.0;
    for (Eigen::Index i = 0; i < ng; ++i)
      for (Eigen::Index j = 0; j < np; ++j) {
        const double c = mc(i, j);
        if (c == 0.0) continue;
        ass_a += c * c / (gt_count(i) + pred_count(j) - c);
        ass_re += c * c / gt_count(i);
        ass_pr += c * c / pred_count(j);
      }
    const double tp = std::max(1.0, static_cast<double>(r.tp[a]));
    r.ass_a[a] = ass_a / tp;
    r.ass_re[a] = ass_re / tp;
    r.ass_pr[a] = ass_pr / tp;
  }
  r.finish();
  return r;
}

EvalReport per_class_report(const TrackSet& gt, const TrackSet& pred, double iou_threshold) {
  std::set<int> classes;
  for (const auto* s : {&gt, &pred})
    for (const auto& [f, objs] : s->frames)
      for (const auto& o : objs) classes.insert(o.class_id);

  EvalReport report;
  EvalRow& agg = report.aggregate;
  agg.class_id = -1;
  std::array<double, kHotaAlphas> ass_a{}, ass_re{}, ass_pr{};
  int with_gt = 0;

  for (int c : classes) {
    TrackSet g = gt.of_class(c), p = pred.of_class(c);
    remove_ignored(g, p, iou_threshold);
    EvalRow row;
    row.class_id = c;
    row.has_gt = g.size() > 0;
    if (row.has_gt) {
      row.clear = clear_mot(g, p, iou_threshold);
      row.id = idf1(g, p, iou_threshold);
      row.hota = hota(g, p);
      report.mmota += row.clear.mota;
      report.midf1 += row.id.idf1;
      report.mhota += row.hota.hota_mean;
      ++with_gt;
    } else {
      const long n = static_cast<long>(p.size());
      row.clear.fp = n;
      row.clear.mota = std::numeric_limits<double>::quiet_NaN();
      row.id.idfp = n;
      for (int a = 0; a < kHotaAlphas; ++a) row.hota.fp[a] = n;
      row.hota.finish();
    }

    agg.clear.fp += row.clear.fp;
    agg.clear.fn += row.clear.fn;
    agg.clear.idsw += row.clear.idsw;
    agg.clear.mt += row.clear.mt;
    agg.clear.ml += row.clear.ml;
    agg.clear.gt_objects += row.clear.gt_objects;
    agg.clear.gt_tracks += row.clear.gt_tracks;
    agg.clear.motp += row.clear.motp * static_cast<double>(row.clear.matches);
    agg.clear.matches += row.clear.matches;
    agg.id.idtp += row.id.idtp;
    agg.id.idfp += row.id.idfp;
    agg.id.idfn += row.id.idfn;
    for (int a = 0; a < kHotaAlphas; ++a) {
      agg.hota.tp[a] += row.hota.tp[a];
      agg.hota.fn[a] += row.hota.fn[a];
      agg.hota.fp[a] += row.hota.fp[a];
      const double tp = static_cast<double>(row.hota.tp[a]);
      ass_a[a] += row.hota.ass_a[a] * tp;
      ass_re[a] += row.hota.ass_re[a] * tp;
      ass_pr[a] += row.hota.ass_pr[a] * tp;
    }
    report.classes.push_back(row);
  }

  if (with_gt == 0) throw std::invalid_argument("undefined MOTA denominator: no ground-truth objects");
  agg.has_gt = true;
  agg.clear.mota = 1.0 - static_cast<double>(agg.clear.fn + agg.clear.fp + agg.clear.idsw) /
                             static_cast<double>(agg.clear.gt_objects);
  agg.clear.motp = agg.clear.matches > 0 ? agg.clear.motp / static_cast<double>(agg.clear.matches) : 0.0;
  const double idd = static_cast<double>(2 * agg.id.idtp + agg.id.idfp + agg.id.idfn);
  agg.id.idf1 = idd > 0 ? 2.0 * static_cast<double>(agg.id.idtp) / idd : 0.0;
  agg.id.idp = agg.id.idtp + agg.id.idfp > 0
                   ? static_cast<double>(agg.id.idtp) / static_cast<double>(agg.id.idtp + agg.id.idfp)
                   : 0.0;
  agg.id.idr = agg.id.idtp + agg.id.idfn > 0
                   ? static_cast<double>(agg.id.idtp) / static_cast<double>(agg.id.idtp + agg.id.idfn)
                   : 0.0;
  for (int a = 0; a < kHotaAlphas; ++a) {
    const double tp = std::max(1.0, static_cast<double>(agg.hota.tp[a]));
    agg.hota.ass_a[a] = ass_a[a] / tp;
    agg.hota.ass_re[a] = ass_re[a] / tp;
    agg.hota.ass_pr[a] = ass_pr[a] / tp;
  }
  agg.hota.finish();

  report.mmota /= with_gt;
  report.midf1 /= with_gt;
  report.mhota /= with_gt;
  return report;
}

EvalReport class_agnostic_report(const TrackSet& gt, const TrackSet& pred, double iou_threshold) {
  auto flatten = [](const TrackSet& s) {
    TrackSet out = s;
    for (auto& [f, objs] : out.frames)
      for (auto& o : objs) o.class_id = 0;
    return out;
  };
  return per_class_report(flatten(gt), flatten(pred), iou_threshold);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "class      MOTA      IDF1      HOTA      DetA      AssA     DetRe     DetPr     AssRe     AssPr"
        "      FP      FN    IDSW    MT    ML\n";
  auto line = [&](const std::string& name, const EvalRow& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "%-8s %8.4f  %8.4f  %8.4f  %8.4f  %8.4f  %8.4f  %8.4f  %8.4f  %8.4f  %6ld  %6ld  %6ld  %4ld  %4ld\n",
                  name.c_str(), r.clear.mota, r.id.idf1, r.hota.hota_mean, r.hota.det_a_mean,
                  r.hota.ass_a_mean, r.hota.det_re_mean, r.hota.det_pr_mean, r.hota.ass_re_mean,
                  r.hota.ass_pr_mean, r.clear.fp, r.clear.fn, r.clear.idsw, r.clear.mt, r.clear.ml);
    os << buf;
  };
  for (const auto& r : classes) line(std::to_string(r.class_id), r);
  line("all", aggregate);
  os << "mMOTA " << fmt(mmota) << "  mIDF1 " << fmt(midf1) << "  mHOTA " << fmt(mhota) << "\n";
  return os.str();
}

std::string EvalReport::to_key_values() const {
  std::ostringstream os;
  auto emit = [&](const std::string& prefix, const EvalRow& r) {
    os << prefix << ".MOTA=" << fmt(r.clear.mota) << "\n";
    os << prefix << ".MOTP=" << fmt(r.clear.motp) << "\n";
    os << prefix << ".IDF1=" << fmt(r.id.idf1) << "\n";
    os << prefix << ".IDP=" << fmt(r.id.idp) << "\n";
    os << prefix << ".IDR=" << fmt(r.id.idr) << "\n";
    os << prefix << ".HOTA=" << fmt(r.hota.hota_mean) << "\n";
    os << prefix << ".DetA=" << fmt(r.hota.det_a_mean) << "\n";
    os << prefix << ".AssA=" << fmt(r.hota.ass_a_mean) << "\n";
    os << prefix << ".DetRe=" << fmt(r.hota.det_re_mean) << "\n";
    os << prefix << ".DetPr=" << fmt(r.hota.det_pr_mean) << "\n";
    os << prefix << ".AssRe=" << fmt(r.hota.ass_re_mean) << "\n";
    os << prefix << ".AssPr=" << fmt(r.hota.ass_pr_mean) << "\n";
    os << prefix << ".FP=" << r.clear.fp << "\n";
    os << prefix << ".FN=" << r.clear.fn << "\n";
    os << prefix << ".IDSW=" << r.clear.idsw << "\n";
    os << prefix << ".MT=" << r.clear.mt << "\n";
    os << prefix << ".ML=" << r.clear.ml << "\n";
    os << prefix << ".IDTP=" << r.id.idtp << "\n";
    os << prefix << ".IDFP=" << r.id.idfp << "\n";
    os << prefix << ".IDFN=" << r.id.idfn << "\n";
  };
  for (const auto& r : classes) emit("class." + std::to_string(r.class_id), r);
  emit("all", aggregate);
  os << "mMOTA=" << fmt(mmota) << "\n";
  os << "mIDF1=" << fmt(midf1) << "\n";
  os << "mHOTA=" << fmt(mhota) << "\n";
  return os.str();
}

}  // namespace simtrack::metrics
