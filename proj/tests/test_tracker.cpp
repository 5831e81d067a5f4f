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

#include <tpagt/synth.hpp>
#include <tpagt/tracker.hpp>

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using namespace tpagt;
using oracle::code_of;

namespace {

constexpr std::uint32_t kDim = 16;

TrackerConfig small_config() {
  TrackerConfig c;
  c.feature_dim = kDim;
  return c;
}

// Three still objects, no detector noise.
SynthOutput static_scene(int frames) {
  SynthScenario s;
  s.width = 320;
  s.height = 240;
  s.frames = frames;
  s.det_jitter = 0.0;
  s.det_drop = 0.0;
  for (int i = 0; i < 3; ++i) {
    SynthObject o;
    o.start = {30.0 + 95.0 * i, 70.0, 50.0, 80.0};
    o.texture_seed = 40u + static_cast<std::uint64_t>(i);
    o.brightness = 0.1 * (i - 1);
    s.objects.push_back(o);
  }
  return gen_scenario(s, 12);
}

std::vector<TrackRow> run(const SynthOutput& out, const std::vector<std::vector<Detection>>& dets,
                          const Model& m, const TrackerConfig& cfg) {
  return run_sequence(out.frames, out.maps, dets, m, cfg);
}

std::vector<std::uint64_t> ids_in_frame(const std::vector<TrackRow>& rows, std::uint64_t frame) {
  std::vector<std::uint64_t> out;
  for (const auto& r : rows) {
    if (r.frame == frame) out.push_back(r.id);
  }
  return out;
}

// Detections of object 0 removed on frames [first, first + len).
std::vector<std::vector<Detection>> with_gap(const SynthOutput& out, std::size_t first, std::size_t len) {
  auto dets = out.detections_per_frame();
  for (std::size_t f = first; f < first + len; ++f) dets[f].erase(dets[f].begin());
  return dets;
}

}  // namespace

TEST(Tracker, FirstFrameNumbersFromOne) {
  const auto out = static_scene(1);
  const Model m = Model::init(1, 7, kDim, 1);
  Tracker t(m, small_config());
  const auto dets = out.detections_per_frame();
  const auto r = t.step(nullptr, out.frames[0], out.maps[0], dets[0], 1);
  ASSERT_EQ(r.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r[i].id, i + 1);
  EXPECT_EQ(t.store().live.size(), 3u);
  EXPECT_EQ(t.store().max_id, 3u);
}

TEST(Tracker, StaticSceneKeepsIds) {
  const auto out = static_scene(5);
  const Model m = Model::init(1, 7, kDim, 1);
  const auto rows = run(out, out.detections_per_frame(), m, small_config());
  ASSERT_EQ(rows.size(), 15u);
  for (std::uint64_t f = 1; f <= 5; ++f) EXPECT_EQ(ids_in_frame(rows, f), (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Tracker, AbsentForKFramesKeepsId) {
  const auto out = static_scene(8);
  const Model m = Model::init(1, 7, kDim, 1);
  TrackerConfig cfg = small_config();
  cfg.k = 3;
  const auto rows = run(out, with_gap(out, 2, 3), m, cfg);
  EXPECT_EQ(ids_in_frame(rows, 6), (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Tracker, AbsentForKPlusOneFramesGetsNewId) {
  const auto out = static_scene(8);
  const Model m = Model::init(1, 7, kDim, 1);
  TrackerConfig cfg = small_config();
  cfg.k = 3;
  const auto rows = run(out, with_gap(out, 2, 4), m, cfg);
  EXPECT_EQ(ids_in_frame(rows, 7), (std::vector<std::uint64_t>{4, 2, 3}));
}

TEST(Tracker, LostStateCountsMissedFrames) {
  const auto out = static_scene(6);
  const Model m = Model::init(1, 7, kDim, 1);
  TrackerConfig cfg = small_config();
  cfg.k = 2;
  Tracker t(m, cfg);
  const auto dets = with_gap(out, 1, 5);
  for (std::size_t f = 0; f < 4; ++f) {
    t.step(f == 0 ? nullptr : &out.frames[f - 1], out.frames[f], out.maps[f], dets[f], f + 1);
    const auto it = t.store().live.find(1);
    if (f < 3) {
      ASSERT_NE(it, t.store().live.end());
      EXPECT_EQ(it->second.missed_frames(), static_cast<int>(f));
    } else {
      EXPECT_EQ(it, t.store().live.end());
    }
  }
}

TEST(Tracker, EmptyFramesOnlyAge) {
  const auto out = static_scene(3);
  const Model m = Model::init(1, 7, kDim, 1);
  Tracker t(m, small_config());
  const auto dets = out.detections_per_frame();
  t.step(nullptr, out.frames[0], out.maps[0], dets[0], 1);
  EXPECT_TRUE(t.step(&out.frames[0], out.frames[1], out.maps[1], {}, 2).empty());
  EXPECT_EQ(t.store().live.size(), 3u);
  for (const auto& [id, trk] : t.store().live) EXPECT_EQ(trk.missed_frames(), 1);
}

TEST(Tracker, FlowOffMatchesFlowOnWhenStatic) {
  const auto out = static_scene(5);
  const Model m = Model::init(1, 7, kDim, 2);
  TrackerConfig off = small_config();
  off.use_flow = false;
  const auto a = run(out, out.detections_per_frame(), m, small_config());
  const auto b = run(out, out.detections_per_frame(), m, off);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
}

TEST(Tracker, Deterministic) {
  const auto out = static_scene(4);
  const Model m = Model::init(1, 7, kDim, 3);
  TrackerConfig cfg = small_config();
  cfg.realign_features = false;
  const auto a = run(out, out.detections_per_frame(), m, cfg);
  const auto b = run(out, out.detections_per_frame(), m, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].bbox, b[i].bbox);
  }
}

TEST(Tracker, IdsNeverReused) {
  const auto out = static_scene(12);
  const Model m = Model::init(1, 7, kDim, 4);
  TrackerConfig cfg = small_config();
  cfg.k = 1;
  // Every object vanishes for two frames in turn, so each comes back fresh.
  auto dets = out.detections_per_frame();
  for (std::size_t f : {2u, 3u}) dets[f].clear();
  for (std::size_t f : {6u, 7u}) dets[f].clear();
  const auto rows = run(out, dets, m, cfg);
  std::set<std::uint64_t> seen_before_gap, seen_after;
  for (const auto& r : rows) (r.frame <= 2 ? seen_before_gap : seen_after).insert(r.id);
  for (auto id : seen_after) EXPECT_EQ(seen_before_gap.count(id), 0u);
  EXPECT_EQ(ids_in_frame(rows, 12), (std::vector<std::uint64_t>{7, 8, 9}));
}

TEST(Tracker, MinConfidenceFilters) {
  const auto out = static_scene(1);
  const Model m = Model::init(1, 7, kDim, 1);
  TrackerConfig cfg = small_config();
  cfg.min_conf = 2.0;
  EXPECT_TRUE(run(out, out.detections_per_frame(), m, cfg).empty());
}

TEST(Tracker, RejectsBadConfig) {
  const Model m = Model::init(1, 7, kDim, 1);
  TrackerConfig cfg = small_config();
  cfg.k = 0;
  EXPECT_EQ(code_of([&] { Tracker t(m, cfg); }), ErrorCode::InvalidArgument);
  cfg = small_config();
  cfg.feature_dim = 32;
  EXPECT_EQ(code_of([&] { Tracker t(m, cfg); }), ErrorCode::ShapeMismatch);
}

TEST(RunSequence, EmptyAndSingle) {
  const Model m = Model::init(1, 7, kDim, 1);
  EXPECT_TRUE(run_sequence({}, {}, {}, m, small_config()).empty());
  const auto out = static_scene(1);
  const auto rows = run(out, out.detections_per_frame(), m, small_config());
  EXPECT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_EQ(r.frame, 1u);
}

TEST(RunSequence, LengthMismatch) {
  const auto out = static_scene(2);
  const Model m = Model::init(1, 7, kDim, 1);
  auto dets = out.detections_per_frame();
  dets.pop_back();
  EXPECT_EQ(code_of([&] { run(out, dets, m, small_config()); }), ErrorCode::InputLengthMismatch);
}
