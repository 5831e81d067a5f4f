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

#include <tpagt/core.hpp>
#include <tpagt/flow.hpp>
#include <tpagt/io.hpp>
#include <tpagt/roifeat.hpp>
#include <tpagt/texture.hpp>
#include <tpagt/train.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace tpagt {

struct SynthObject {
  BBox start;             // box at frame 1
  double vx = 0.0;        // px / frame
  double vy = 0.0;
  std::uint64_t texture_seed = 1;
  double brightness = 0.0;  // offset added to the texture mean of 0.5
  int first_frame = 1;      // 1-based, inclusive
  int last_frame = 0;       // 0 = until the end
  std::vector<std::pair<int, int>> occlusions;  // hidden frame ranges, inclusive

  BBox box_at(int frame) const { return start.translated(vx * (frame - 1), vy * (frame - 1)); }
  bool present(int frame, int total) const {
    return frame >= first_frame && frame <= (last_frame == 0 ? total : last_frame);
  }
  bool hidden(int frame) const {
    return std::any_of(occlusions.begin(), occlusions.end(),
                       [frame](const auto& r) { return frame >= r.first && frame <= r.second; });
  }
};

struct SynthScenario {
  std::uint32_t width = 640;
  std::uint32_t height = 480;
  int frames = 30;
  std::vector<SynthObject> objects;
  double background_amplitude = 0.05;
  double object_contrast = 0.35;
  double lighting_gradient = 0.0;  // relative gain change from left to right edge
  double det_jitter = 1.0;         // px, Gaussian sigma on every box coordinate
  double det_drop = 0.02;
  double min_detect_visibility = 0.25;
};

struct SynthOutput {
  std::vector<GrayFrame> frames;
  std::vector<FeatureMap> maps;
  std::vector<MotRow> gt;          // conf = consider flag, x = class, y = visibility
  std::vector<MotRow> detections;  // id holds the true object id (written as -1)

  std::vector<std::vector<Detection>> detections_per_frame() const {
    std::vector<std::vector<Detection>> out(frames.size());
    for (const auto& r : detections) out[r.frame - 1].push_back({r.bbox(), r.conf, r.frame});
    return out;
  }

  /// Jittered detections with their true ids, for building training pairs.
  LabeledSequence labeled() const {
    LabeledSequence seq;
    seq.frames = frames;
    seq.maps = maps;
    seq.objects.resize(frames.size());
    for (const auto& r : detections) {
      seq.objects[r.frame - 1].push_back({static_cast<std::uint64_t>(r.id), r.bbox()});
    }
    return seq;
  }
};

namespace detail {

inline void check_scenario(const SynthScenario& s) {
  if (s.frames < 1 || s.width < 16 || s.height < 16) {
    throw Error(ErrorCode::ScenarioInfeasible, "scenario needs >= 1 frame and >= 16x16 pixels");
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& o = s.objects[i];
    if (!o.start.valid()) throw Error(ErrorCode::ScenarioInfeasible, "object " + std::to_string(i + 1) + " has an invalid box");
    for (int f = 1; f <= s.frames; ++f) {
      if (!o.present(f, s.frames) || o.hidden(f)) continue;
      const BBox b = o.box_at(f);
      if (b.left < 1.0 || b.top < 1.0 || b.right() > s.width - 1.0 || b.bottom() > s.height - 1.0) {
        throw Error(ErrorCode::ScenarioInfeasible,
                    "object " + std::to_string(i + 1) + " leaves the image at frame " + std::to_string(f));
      }
    }
  }
}

}  // namespace detail

/// Renders textured rectangles over a static noise background. Later objects
/// are drawn on top; visibility is the unoccluded share of an object's pixels.
inline SynthOutput gen_scenario(const SynthScenario& s, std::uint64_t seed) {
  detail::check_scenario(s);
  const ValueNoise background(seed * 7919 + 17, {{32.0, 1.0}, {8.0, 0.5}});
  std::vector<ValueNoise> textures;
  for (const auto& o : s.objects) textures.push_back(ValueNoise::patterned(o.texture_seed));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, s.det_jitter > 0.0 ? s.det_jitter : 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  SynthOutput out;
  const auto W = static_cast<std::int64_t>(s.width);
  const auto H = static_cast<std::int64_t>(s.height);
  std::vector<int> owner(static_cast<std::size_t>(W * H));
  for (int f = 1; f <= s.frames; ++f) {
    GrayFrame frame(s.width, s.height);
    std::fill(owner.begin(), owner.end(), -1);
    auto light = [&](std::int64_t x) {
      return 1.0 + s.lighting_gradient * ((static_cast<double>(x) + 0.5) / s.width - 0.5);
    };
    for (std::int64_t y = 0; y < H; ++y) {
      for (std::int64_t x = 0; x < W; ++x) {
        frame.at(x, y) = static_cast<float>(std::clamp(
            light(x) * (0.5 + s.background_amplitude * background(static_cast<double>(x), static_cast<double>(y))),
            0.0, 1.0));
      }
    }
    std::vector<std::size_t> painted(s.objects.size(), 0);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const auto& o = s.objects[i];
      if (!o.present(f, s.frames) || o.hidden(f)) continue;
      const BBox b = o.box_at(f);
      const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(b.left - 0.5)));
      const auto x1 = std::min<std::int64_t>(W, static_cast<std::int64_t>(std::ceil(b.right() - 0.5)));
      const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(b.top - 0.5)));
      const auto y1 = std::min<std::int64_t>(H, static_cast<std::int64_t>(std::ceil(b.bottom() - 0.5)));
      for (std::int64_t y = y0; y < y1; ++y) {
        for (std::int64_t x = x0; x < x1; ++x) {
          const double tex = textures[i](x + 0.5 - b.left, y + 0.5 - b.top);
          const double v = light(x) * (0.5 + o.brightness + s.object_contrast * tex);
          frame.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          owner[static_cast<std::size_t>(y * W + x)] = static_cast<int>(i);
        }
      }
      painted[i] = static_cast<std::size_t>(std::max<std::int64_t>(0, (x1 - x0) * (y1 - y0)));
    }
    std::vector<std::size_t> owned(s.objects.size(), 0);
    for (int who : owner) {
      if (who >= 0) ++owned[static_cast<std::size_t>(who)];
    }

    // PGM output is 8-bit, so render on the same grid the tracker will read.
    frame = quantize8(frame);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const auto& o = s.objects[i];
      if (!o.present(f, s.frames)) continue;
      const double vis = painted[i] == 0 ? 0.0 : static_cast<double>(owned[i]) / static_cast<double>(painted[i]);
      const BBox b = o.box_at(f);
      const auto id = static_cast<std::int64_t>(i + 1);
      out.gt.push_back({static_cast<std::uint64_t>(f), id, b.left, b.top, b.width, b.height,
                        vis > 0.0 ? 1.0 : 0.0, 1.0, vis, -1.0});
      if (vis < s.min_detect_visibility) continue;
      const double drop_draw = uni(rng);
      BBox d = b;
      if (s.det_jitter > 0.0) {
        d.left += jitter(rng);
        d.top += jitter(rng);
        d.width = std::max(2.0, d.width + jitter(rng));
        d.height = std::max(2.0, d.height + jitter(rng));
      }
      const double conf = 0.7 + 0.3 * uni(rng);
      if (drop_draw < s.det_drop) continue;
      out.detections.push_back({static_cast<std::uint64_t>(f), id, d.left, d.top, d.width, d.height, conf});
    }
    out.maps.push_back(FeatureMap::from_frame(frame));
    out.frames.push_back(std::move(frame));
  }
  return out;
}

/// Parameters of a random linear-motion scenario family.
struct RandomScenarioOptions {
  int objects = 4;
  int frames = 30;
  std::uint32_t width = 640;
  std::uint32_t height = 480;
  double min_speed = 1.0;
  double max_speed = 3.0;
  double min_w = 40.0, max_w = 60.0;
  double min_h = 60.0, max_h = 90.0;
  int occlusions = 1;        // objects that get one hidden interval
  int occlusion_length = 3;
  int late_entries = 0;      // objects that appear after frame 1
  double lighting_gradient = 0.0;
  double det_jitter = 1.0;
  double det_drop = 0.02;
};

/// Objects ride horizontal lanes (one per object, no vertical overlap) with a
/// small vertical drift, starting where they stay inside the frame throughout.
inline SynthScenario random_scenario(std::uint64_t seed, const RandomScenarioOptions& opt) {
  if (opt.objects < 1 || opt.frames < 1) throw Error(ErrorCode::ScenarioInfeasible, "need objects and frames");
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5DEADBEEFull);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  SynthScenario s;
  s.width = opt.width;
  s.height = opt.height;
  s.frames = opt.frames;
  s.lighting_gradient = opt.lighting_gradient;
  s.det_jitter = opt.det_jitter;
  s.det_drop = opt.det_drop;

  const double lane = static_cast<double>(opt.height) / opt.objects;
  if (lane < opt.max_h + 4.0) throw Error(ErrorCode::ScenarioInfeasible, "lanes too narrow for object height");
  for (int i = 0; i < opt.objects; ++i) {
    SynthObject o;
    o.start.width = uniform(opt.min_w, opt.max_w);
    o.start.height = uniform(opt.min_h, opt.max_h);
    const double speed = uniform(opt.min_speed, opt.max_speed);
    const double dir = uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    o.vx = dir * speed;
    const double slack_y = lane - o.start.height - 4.0;
    const double travel_y = std::min(slack_y * 0.5, 0.1 * speed * (opt.frames - 1));
    o.vy = opt.frames > 1 ? uniform(-travel_y, travel_y) / (opt.frames - 1) : 0.0;
    const double y_lo = i * lane + 2.0 + std::max(0.0, -o.vy * (opt.frames - 1));
    const double y_hi = (i + 1) * lane - 2.0 - o.start.height - std::max(0.0, o.vy * (opt.frames - 1));
    o.start.top = uniform(y_lo, std::max(y_lo, y_hi));
    const double travel_x = std::abs(o.vx) * (opt.frames - 1);
    const double x_room = opt.width - 4.0 - o.start.width - travel_x;
    if (x_room < 0.0) throw Error(ErrorCode::ScenarioInfeasible, "objects cannot stay inside the frame");
    const double x_min = 2.0 + (o.vx < 0.0 ? travel_x : 0.0);
    o.start.left = x_min + uniform(0.0, x_room);
    o.texture_seed = seed * 1000003ull + static_cast<std::uint64_t>(i) * 7919ull + 1;
    o.brightness = uniform(-0.12, 0.12);
    s.objects.push_back(std::move(o));
  }

  std::vector<int> order(static_cast<std::size_t>(opt.objects));
  for (int i = 0; i < opt.objects; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const int occl = std::min(opt.occlusions, opt.objects);
  for (int n = 0; n < occl; ++n) {
    auto& o = s.objects[static_cast<std::size_t>(order[static_cast<std::size_t>(n)])];
    const int lo = 4;
    const int hi = opt.frames - opt.occlusion_length - 3;
    if (hi < lo) break;
    const int start = std::uniform_int_distribution<int>(lo, hi)(rng);
    o.occlusions.emplace_back(start, start + opt.occlusion_length - 1);
  }
  for (int n = 0; n < std::min(opt.late_entries, opt.objects - occl); ++n) {
    auto& o = s.objects[static_cast<std::size_t>(order[static_cast<std::size_t>(occl + n)])];
    o.first_frame = std::uniform_int_distribution<int>(2, std::max(2, opt.frames / 2))(rng);
  }
  return s;
}

/// frames/NNNNNN.pgm, maps/NNNNNN.ften, gt.txt, det.txt and labels.txt (the
/// detections with their true ids) under dir.
inline void write_scenario(const SynthOutput& out, const std::string& dir, bool with_maps = true) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "frames");
  if (with_maps) fs::create_directories(fs::path(dir) / "maps");
  char name[32];
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu", i + 1);
    write_file_atomic((fs::path(dir) / "frames" / (std::string(name) + ".pgm")).string(), encode_pgm(out.frames[i]));
    if (with_maps) write_ften((fs::path(dir) / "maps" / (std::string(name) + ".ften")).string(), out.maps[i]);
  }
  std::string gt;
  for (const auto& r : out.gt) {
    gt += std::to_string(r.frame) + "," + std::to_string(r.id) + "," + detail::format_double(r.left) + "," +
          detail::format_double(r.top) + "," + detail::format_double(r.width) + "," +
          detail::format_double(r.height) + "," + detail::format_conf(r.conf) + "," +
          detail::format_conf(r.x) + "," + detail::format_conf(r.y) + ",-1\n";
  }
  write_file_atomic((fs::path(dir) / "gt.txt").string(), gt);
  write_result(out.detections, (fs::path(dir) / "labels.txt").string());
  std::vector<MotRow> dets = out.detections;
  for (auto& r : dets) r.id = -1;
  write_result(dets, (fs::path(dir) / "det.txt").string());
}

}  // namespace tpagt
