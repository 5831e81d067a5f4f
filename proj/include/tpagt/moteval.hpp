// Copyright 2026 The tpagt Authors. All Rights Reserved.
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

#pragma once

#include <tpagt/assoc.hpp>
#include <tpagt/core.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace tpagt {

/// One box of a ground-truth or hypothesis track.
struct TrackBox {
  std::uint64_t frame = 0;
  std::int64_t id = -1;
  BBox box;
  bool ignored = false;  // ground truth only: excluded from scoring
};

struct FrameMatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (gt index, pred index)
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

/// Max-IOU one-to-one matching inside a frame; pairs under the threshold are
/// discarded. Unmatched predictions are FP, unmatched ground truth FN.
inline FrameMatch frame_match(std::span<const BBox> gt, std::span<const BBox> pred,
                              double iou_thresh = 0.5) {
  FrameMatch out;
  if (gt.empty() || pred.empty()) {
    out.false_negatives = gt.size();
    out.false_positives = pred.size();
    return out;
  }
  Matrix ious = iou_matrix(gt, pred);
  ious = (ious.array() >= iou_thresh).select(ious, 0.0);
  const bool transposed = ious.rows() > ious.cols();
  const auto assignment = transposed ? hungarian_max(ious.transpose()) : hungarian_max(ious);
  for (auto [r, c] : assignment) {
    if (transposed) std::swap(r, c);
    if (ious(r, c) >= iou_thresh && ious(r, c) > 0.0) {
      out.pairs.emplace_back(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  out.false_negatives = gt.size() - out.pairs.size();
  out.false_positives = pred.size() - out.pairs.size();
  return out;
}

struct MetricCounts {
  std::vector<std::size_t> fp, fn, idsw, gt;  // per frame
  std::vector<double> coverage;               // per ground-truth trajectory

  static std::size_t sum(const std::vector<std::size_t>& v) {
    std::size_t s = 0;
    for (auto x : v) s += x;
    return s;
  }
  std::size_t total_fp() const { return sum(fp); }
  std::size_t total_fn() const { return sum(fn); }
  std::size_t total_idsw() const { return sum(idsw); }
  std::size_t total_gt() const { return sum(gt); }
};

inline double mota(std::size_t gt, std::size_t fp, std::size_t fn, std::size_t idsw) {
  if (gt == 0) throw Error(ErrorCode::ZeroGroundTruth, "MOTA undefined without ground truth");
  return 1.0 - static_cast<double>(fp + fn + idsw) / static_cast<double>(gt);
}

inline double mota(const MetricCounts& c) {
  return mota(c.total_gt(), c.total_fp(), c.total_fn(), c.total_idsw());
}

/// Share of trajectories covered >= 80% (mostly tracked) and <= 20% (mostly lost).
inline std::pair<double, double> mt_ml(std::span<const double> coverages) {
  if (coverages.empty()) return {0.0, 0.0};
  const auto n = static_cast<double>(coverages.size());
  const auto mt = std::count_if(coverages.begin(), coverages.end(), [](double c) { return c >= 0.8; });
  const auto ml = std::count_if(coverages.begin(), coverages.end(), [](double c) { return c <= 0.2; });
  return {static_cast<double>(mt) / n, static_cast<double>(ml) / n};
}

/// Counts switches: a ground-truth id re-matched to a different prediction id
/// than the one it was last matched to. Frames without a match don't count.
inline std::size_t idsw_count(
    std::span<const std::vector<std::pair<std::int64_t, std::int64_t>>> per_frame) {
  std::map<std::int64_t, std::int64_t> last;
  std::size_t switches = 0;
  for (const auto& frame : per_frame) {
    for (const auto& [g, p] : frame) {
      auto it = last.find(g);
      if (it != last.end() && it->second != p) ++switches;
      last[g] = p;
    }
  }
  return switches;
}

namespace detail {

inline std::map<std::uint64_t, std::vector<const TrackBox*>> by_frame(std::span<const TrackBox> rows) {
  std::map<std::uint64_t, std::vector<const TrackBox*>> out;
  for (const auto& r : rows) out[r.frame].push_back(&r);
  return out;
}

inline std::vector<BBox> boxes_of(const std::vector<const TrackBox*>& rows) {
  std::vector<BBox> out;
  out.reserve(rows.size());
  for (const auto* r : rows) out.push_back(r->box);
  return out;
}

// Removes predictions covering ignored ground truth so they count neither as
// FP nor toward identity scores.
inline std::vector<TrackBox> drop_ignored(std::span<const TrackBox> gt, std::span<const TrackBox> pred,
                                          double iou_thresh) {
  std::vector<TrackBox> kept_gt_ignored;
  for (const auto& g : gt) {
    if (g.ignored) kept_gt_ignored.push_back(g);
  }
  if (kept_gt_ignored.empty()) return {pred.begin(), pred.end()};

  auto gt_frames = by_frame(gt);
  auto pred_frames = by_frame(pred);
  std::vector<TrackBox> out;
  for (const auto& [frame, preds] : pred_frames) {
    std::vector<const TrackBox*> live, ign;
    if (auto it = gt_frames.find(frame); it != gt_frames.end()) {
      for (const auto* g : it->second) (g->ignored ? ign : live).push_back(g);
    }
    const FrameMatch fm = frame_match(boxes_of(live), boxes_of(preds), iou_thresh);
    std::vector<bool> matched(preds.size(), false);
    for (const auto& pr : fm.pairs) matched[pr.second] = true;
    std::vector<const TrackBox*> rest;
    std::vector<std::size_t> rest_idx;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!matched[i]) {
        rest.push_back(preds[i]);
        rest_idx.push_back(i);
      }
    }
    std::vector<bool> drop(preds.size(), false);
    for (const auto& pr : frame_match(boxes_of(ign), boxes_of(rest), iou_thresh).pairs) {
      drop[rest_idx[pr.second]] = true;
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!drop[i]) out.push_back(*preds[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Identity F1 with the one-to-one gt/pred id mapping that maximizes the
/// number of identity-consistent detections (IOU >= threshold).
inline double idf1(std::span<const TrackBox> gt, std::span<const TrackBox> pred, double iou_thresh = 0.5) {
  if (gt.empty()) throw Error(ErrorCode::ZeroGroundTruth, "IDF1 undefined without ground truth");
  if (pred.empty()) return 0.0;

  std::map<std::int64_t, Eigen::Index> gt_index, pred_index;
  for (const auto& g : gt) gt_index.emplace(g.id, static_cast<Eigen::Index>(gt_index.size()));
  for (const auto& p : pred) pred_index.emplace(p.id, static_cast<Eigen::Index>(pred_index.size()));

  Matrix overlap = Matrix::Zero(static_cast<Eigen::Index>(gt_index.size()),
                                static_cast<Eigen::Index>(pred_index.size()));
  const auto gt_frames = detail::by_frame(gt);
  const auto pred_frames = detail::by_frame(pred);
  for (const auto& [frame, gts] : gt_frames) {
    auto it = pred_frames.find(frame);
    if (it == pred_frames.end()) continue;
    for (const auto* g : gts) {
      for (const auto* p : it->second) {
        if (iou(g->box, p->box) >= iou_thresh) overlap(gt_index[g->id], pred_index[p->id]) += 1.0;
      }
    }
  }
  double idtp = 0.0;
  if (overlap.rows() <= overlap.cols()) {
    for (auto [r, c] : hungarian_max(overlap)) idtp += overlap(r, c);
  } else {
    const Matrix t = overlap.transpose();
    for (auto [r, c] : hungarian_max(t)) idtp += t(r, c);
  }
  const double idfn = static_cast<double>(gt.size()) - idtp;
  const double idfp = static_cast<double>(pred.size()) - idtp;
  return 2.0 * idtp / (2.0 * idtp + idfp + idfn);
}

struct EvalSummary {
  double mota = 0.0;
  double idf1 = 0.0;
  double mt = 0.0;
  double ml = 0.0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t idsw = 0;
  std::size_t gt = 0;
  MetricCounts counts;
};

/// CLEAR-style counts plus IDF1/MT/ML over a full sequence. Ignored ground
/// truth is removed together with predictions that cover it.
inline EvalSummary evaluate(std::span<const TrackBox> gt_all, std::span<const TrackBox> pred_all,
                            double iou_thresh = 0.5) {
  std::vector<TrackBox> gt;
  for (const auto& g : gt_all) {
    if (!g.ignored) gt.push_back(g);
  }
  if (gt.empty()) throw Error(ErrorCode::ZeroGroundTruth, "no scorable ground truth");
  const std::vector<TrackBox> pred = detail::drop_ignored(gt_all, pred_all, iou_thresh);

  const auto gt_frames = detail::by_frame(gt);
  const auto pred_frames = detail::by_frame(pred);
  std::vector<std::uint64_t> frames;
  for (const auto& [f, _] : gt_frames) frames.push_back(f);
  for (const auto& [f, _] : pred_frames) frames.push_back(f);
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

  EvalSummary s;
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> cover;  // gt id -> (matched, present)
  std::map<std::int64_t, std::int64_t> last_pred;
  static const std::vector<const TrackBox*> kNone;
  for (auto f : frames) {
    auto git = gt_frames.find(f);
    auto pit = pred_frames.find(f);
    const auto& gts = git == gt_frames.end() ? kNone : git->second;
    const auto& preds = pit == pred_frames.end() ? kNone : pit->second;
    const FrameMatch fm = frame_match(detail::boxes_of(gts), detail::boxes_of(preds), iou_thresh);
    std::size_t switches = 0;
    for (const auto* g : gts) cover[g->id].second += 1;
    for (const auto& [gi, pi] : fm.pairs) {
      const std::int64_t gid = gts[gi]->id;
      const std::int64_t pid = preds[pi]->id;
      cover[gid].first += 1;
      auto it = last_pred.find(gid);
      if (it != last_pred.end() && it->second != pid) ++switches;
      last_pred[gid] = pid;
    }
    s.counts.fp.push_back(fm.false_positives);
    s.counts.fn.push_back(fm.false_negatives);
    s.counts.gt.push_back(gts.size());
    s.counts.idsw.push_back(switches);
  }
  for (const auto& [id, c] : cover) {
    s.counts.coverage.push_back(static_cast<double>(c.first) / static_cast<double>(c.second));
  }
  s.fp = s.counts.total_fp();
  s.fn = s.counts.total_fn();
  s.idsw = s.counts.total_idsw();
  s.gt = s.counts.total_gt();
  s.mota = mota(s.counts);
  s.idf1 = idf1(gt, pred, iou_thresh);
  std::tie(s.mt, s.ml) = mt_ml(s.counts.coverage);
  return s;
}

}  // namespace tpagt
