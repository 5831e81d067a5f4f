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

#include <tpagt/agnn.hpp>
#include <tpagt/assoc.hpp>
#include <tpagt/core.hpp>
#include <tpagt/flow.hpp>
#include <tpagt/roifeat.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace tpagt {

struct TrackerConfig {
  int k = 10;                   // frames a lost tracklet stays matchable
  double margin = 0.2;          // new-object threshold in the augmented matrix
  bool realign_features = true; // re-extract tracklet features in the current frame
  bool use_flow = true;         // false: zero-motion predictor
  FlowConfig flow;
  std::uint32_t feature_dim = 256;
  double min_conf = 0.0;

  void validate() const {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (!(margin > 0.0 && margin < 1.0)) throw Error(ErrorCode::InvalidArgument, "margin must lie in (0,1)");
  }
};

/// Live (active or lost) tracklets keyed by id. Dead tracklets are dropped;
/// max_id only grows, so ids are never reused.
struct TrackletStore {
  std::map<std::uint64_t, Tracklet> live;
  std::uint64_t max_id = 0;
};

struct TrackedDetection {
  Detection detection;
  std::uint64_t id = 0;
};

class Tracker {
 public:
  Tracker(const Model& model, TrackerConfig cfg) : model_(model), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (model_.embed.dim != cfg_.feature_dim || model_.agnn.dim() != cfg_.feature_dim) {
      throw Error(ErrorCode::ShapeMismatch, "model dimension differs from configured feature_dim");
    }
  }

  /// Associates one frame's detections. prev_frame is null on the first frame
  /// (or whenever no previous image is available, which disables flow).
  std::vector<TrackedDetection> step(const GrayFrame* prev_frame, const GrayFrame& curr_frame,
                                     const FeatureMap& curr_map, std::span<const Detection> detections,
                                     std::uint64_t frame) {
    std::vector<Detection> dets;
    for (const auto& d : detections) {
      if (d.confidence >= cfg_.min_conf) dets.push_back(d);
    }

    std::vector<Tracklet*> trks;
    for (auto& [id, t] : store_.live) trks.push_back(&t);

    if (dets.empty()) {
      age_unmatched(trks, std::vector<bool>(trks.size(), false));
      return {};
    }

    // (1) predicted tracklet boxes in the current frame
    std::vector<BBox> trk_boxes;
    trk_boxes.reserve(trks.size());
    std::optional<FlowPair> flow;
    for (const Tracklet* t : trks) {
      BBox box = t->last_box();
      if (cfg_.use_flow && prev_frame != nullptr && frame > 0 && t->last_seen == frame - 1) {
        if (!flow) flow.emplace(*prev_frame, curr_frame, cfg_.flow);
        try {
          box = flow->predict(box).first;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::OutOfBounds) throw;
        }
      }
      trk_boxes.push_back(box);
    }

    // (2)-(3) features
    std::vector<BBox> det_boxes;
    det_boxes.reserve(dets.size());
    for (const auto& d : dets) det_boxes.push_back(d.bbox);
    const FeatureMatrix fd = extract_features(curr_map, det_boxes, model_.embed);

    std::vector<std::uint64_t> ids;
    for (const Tracklet* t : trks) ids.push_back(t->id);

    AssignmentResult res;
    if (trks.empty()) {
      res = match(Matrix(static_cast<Eigen::Index>(dets.size()), 0), cfg_.margin, store_.max_id + 1, ids);
    } else {
      FeatureMatrix ft;
      if (cfg_.realign_features) {
        ft = extract_features(curr_map, trk_boxes, model_.embed);
      } else {
        ft.resize(static_cast<Eigen::Index>(trks.size()), fd.cols());
        for (std::size_t j = 0; j < trks.size(); ++j) {
          ft.row(static_cast<Eigen::Index>(j)) = trks[j]->last_feature.transpose();
        }
      }
      // (4)-(6) IOU, graph similarity, augmented assignment
      const Matrix ious = iou_matrix(det_boxes, trk_boxes);
      const AgnnCache cache = forward(fd, ft, ious, model_.agnn);
      last_similarity_ = cache.s_out;
      res = match(cache.s_out, cfg_.margin, store_.max_id + 1, ids);
    }

    // (7) store update
    std::vector<TrackedDetection> out;
    std::vector<Tracklet> fresh;
    out.reserve(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto& outcome = res.detections[i];
      const FeatureVector feat = fd.row(static_cast<Eigen::Index>(i)).transpose();
      if (outcome.matched) {
        Tracklet& t = *trks[static_cast<std::size_t>(outcome.tracklet)];
        t.history.emplace_back(frame, dets[i].bbox);
        while (t.history.size() > static_cast<std::size_t>(cfg_.k)) t.history.pop_front();
        t.last_feature = feat;
        t.last_seen = frame;
        t.state = Active{};
      } else {
        Tracklet t;
        t.id = outcome.id;
        t.history.emplace_back(frame, dets[i].bbox);
        t.last_feature = feat;
        t.last_seen = frame;
        fresh.push_back(std::move(t));
      }
      out.push_back({dets[i], outcome.id});
    }
    age_unmatched(trks, res.tracklet_matched);
    for (auto& t : fresh) store_.live.emplace(t.id, std::move(t));
    store_.max_id = std::max(store_.max_id, res.next_id - 1);
    return out;
  }

  const TrackletStore& store() const { return store_; }
  const Matrix& last_similarity() const { return last_similarity_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  void age_unmatched(const std::vector<Tracklet*>& trks, const std::vector<bool>& matched) {
    std::vector<std::uint64_t> dead;
    for (std::size_t j = 0; j < trks.size(); ++j) {
      if (matched[j]) continue;
      Tracklet& t = *trks[j];
      const int missed = t.missed_frames() + 1;
      if (missed > cfg_.k) {
        t.state = Dead{};
        dead.push_back(t.id);
      } else {
        t.state = Lost{missed};
      }
    }
    for (auto id : dead) store_.live.erase(id);
  }

  const Model& model_;
  TrackerConfig cfg_;
  TrackletStore store_;
  Matrix last_similarity_;
};

struct TrackRow {
  std::uint64_t frame = 0;
  std::uint64_t id = 0;
  BBox bbox;
  double confidence = 1.0;
};

/// Folds Tracker::step over a sequence whose frame i carries index i + 1.
inline std::vector<TrackRow> run_sequence(std::span<const GrayFrame> frames,
                                          std::span<const FeatureMap> maps,
                                          std::span<const std::vector<Detection>> detections,
                                          const Model& model, const TrackerConfig& cfg) {
  if (frames.size() != maps.size() || frames.size() != detections.size()) {
    throw Error(ErrorCode::InputLengthMismatch, "frames, maps and detections must align");
  }
  Tracker tracker(model, cfg);
  std::vector<TrackRow> rows;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const GrayFrame* prev = t == 0 ? nullptr : &frames[t - 1];
    const auto frame = static_cast<std::uint64_t>(t + 1);
    for (const auto& td : tracker.step(prev, frames[t], maps[t], detections[t], frame)) {
      rows.push_back({frame, td.id, td.detection.bbox, td.detection.confidence});
    }
  }
  return rows;
}

}  // namespace tpagt
