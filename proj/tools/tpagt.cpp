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

#include <tpagt/scenario_json.hpp>
#include <tpagt/tpagt.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace tpagt;

namespace {

std::vector<fs::path> files_with_ext(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<GrayFrame> load_frames(const fs::path& dir) {
  std::vector<GrayFrame> frames;
  for (const auto& p : files_with_ext(dir, ".pgm")) frames.push_back(read_pgm(p.string()));
  return frames;
}

std::vector<FeatureMap> load_maps(const fs::path& dir) {
  std::vector<FeatureMap> maps;
  for (const auto& p : files_with_ext(dir, ".ften")) maps.push_back(read_ften(p.string()));
  return maps;
}

std::vector<FeatureMap> maps_for(const std::vector<GrayFrame>& frames, const std::string& map_dir) {
  if (!map_dir.empty()) {
    auto maps = load_maps(map_dir);
    if (maps.size() != frames.size()) {
      throw Error(ErrorCode::InputLengthMismatch, std::to_string(frames.size()) + " frames but " +
                                                      std::to_string(maps.size()) + " feature maps");
    }
    return maps;
  }
  std::vector<FeatureMap> maps;
  for (const auto& f : frames) maps.push_back(FeatureMap::from_frame(f));
  return maps;
}

AppConfig load_config(const std::string& path) { return path.empty() ? AppConfig{} : read_config(path); }

std::optional<std::pair<std::uint32_t, std::uint32_t>> parse_size(const std::string& s) {
  unsigned w = 0, h = 0;
  char x = 0;
  std::istringstream in(s);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || w == 0 || h == 0 || !in.eof()) return std::nullopt;
  return std::pair{w, h};
}

BBox scaled(const BBox& b, double sx, double sy) {
  return {b.left * sx, b.top * sy, b.width * sx, b.height * sy};
}

// --- track ------------------------------------------------------------------

struct TrackArgs {
  std::string dets, frames, map_dir, params, config, out, resize;
};

void run_track(const TrackArgs& a) {
  AppConfig cfg = load_config(a.config);
  const Model model = read_checkpoint(a.params);
  if (a.config.empty()) cfg.tracker.feature_dim = model.embed.dim;

  std::vector<GrayFrame> frames = load_frames(a.frames);
  double sx = 1.0, sy = 1.0;
  if (!a.resize.empty() && !frames.empty()) {
    const auto [w, h] = *parse_size(a.resize);
    sx = static_cast<double>(w) / frames.front().width;
    sy = static_cast<double>(h) / frames.front().height;
    for (auto& f : frames) f = resize(f, w, h);
  }
  const std::vector<FeatureMap> maps = maps_for(frames, a.map_dir);

  std::vector<std::vector<Detection>> dets(frames.size());
  for (auto& [frame, list] : parse_det(a.dets)) {
    if (frame > frames.size()) {
      throw Error(ErrorCode::InputLengthMismatch, "detection for frame " + std::to_string(frame) + " but only " +
                                                      std::to_string(frames.size()) + " frames");
    }
    for (auto& d : list) d.bbox = scaled(d.bbox, sx, sy);
    dets[frame - 1] = std::move(list);
  }

  auto tracks = run_sequence(frames, maps, dets, model, cfg.tracker);
  for (auto& t : tracks) t.bbox = scaled(t.bbox, 1.0 / sx, 1.0 / sy);
  write_result(to_rows(tracks), a.out);
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> data;
  std::string config, out_params, init_params;
  int epochs = 0;
  int jobs = 1;
  double min_visibility = 0.25;
};

std::vector<fs::path> sequence_dirs(const std::vector<std::string>& roots) {
  std::vector<fs::path> out;
  for (const auto& r : roots) {
    const fs::path root(r);
    if (fs::exists(root / "gt.txt")) {
      out.push_back(root);
      continue;
    }
    if (!fs::is_directory(root)) throw Error(ErrorCode::IoError, "not a directory: " + r);
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && fs::exists(e.path() / "gt.txt")) subs.push_back(e.path());
    }
    if (subs.empty()) throw Error(ErrorCode::IoError, "no gt.txt under " + r);
    std::sort(subs.begin(), subs.end());
    out.insert(out.end(), subs.begin(), subs.end());
  }
  return out;
}

std::vector<FramePairSample> pairs_from(const fs::path& dir, const AppConfig& cfg, double min_vis) {
  LabeledSequence seq;
  seq.frames = load_frames(dir / "frames");
  seq.maps = maps_for(seq.frames, fs::exists(dir / "maps") ? (dir / "maps").string() : std::string());
  seq.objects.resize(seq.frames.size());
  // Detections with true ids beat gt boxes: they carry the detector's noise.
  const bool labeled = fs::exists(dir / "labels.txt");
  for (const auto& r : read_mot((dir / (labeled ? "labels.txt" : "gt.txt")).string())) {
    if (r.id < 0) continue;
    if (!labeled && (r.conf == 0.0 || (r.y >= 0.0 && r.y < min_vis))) continue;  // consider, visibility
    if (r.frame > seq.frames.size()) {
      throw Error(ErrorCode::InputLengthMismatch, dir.string() + ": labels beyond the image list");
    }
    seq.objects[r.frame - 1].push_back({static_cast<std::uint64_t>(r.id), r.bbox()});
  }
  return build_training_pairs(seq, {cfg.tracker.k, cfg.tracker.flow, cfg.pool});
}

void run_train(const TrainArgs& a) {
  AppConfig cfg = load_config(a.config);
  if (a.epochs > 0) cfg.schedule.total_epochs = a.epochs;
  if (!cfg.schedule.valid()) throw Error(ErrorCode::InvalidArgument, "invalid learning-rate schedule");

  const auto dirs = sequence_dirs(a.data);
  std::vector<std::vector<FramePairSample>> per_dir(dirs.size());
  std::vector<std::exception_ptr> errors(dirs.size());
  const auto jobs = static_cast<std::size_t>(std::max(1, a.jobs));
  for (std::size_t start = 0; start < dirs.size(); start += jobs) {
    std::vector<std::thread> pool;
    for (std::size_t i = start; i < std::min(dirs.size(), start + jobs); ++i) {
      pool.emplace_back([&, i] {
        try {
          per_dir[i] = pairs_from(dirs[i], cfg, a.min_visibility);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<FramePairSample> pairs;
  for (auto& v : per_dir) std::move(v.begin(), v.end(), std::back_inserter(pairs));
  if (pairs.empty()) throw Error(ErrorCode::EmptyBatch, "no training pairs in the given data");
  std::cerr << "training on " << pairs.size() << " frame pairs from " << dirs.size() << " sequence(s)\n";

  const std::uint32_t channels = static_cast<std::uint32_t>(pairs.front().det_regions.cols()) / (cfg.pool * cfg.pool);
  Model model = a.init_params.empty() ? Model::init(channels, cfg.pool, cfg.tracker.feature_dim, cfg.seed)
                                      : read_checkpoint(a.init_params);

  TrainOptions opt;
  opt.schedule = cfg.schedule;
  opt.weights = cfg.loss;
  opt.epochs = cfg.schedule.total_epochs;
  opt.checkpoint_every = cfg.checkpoint_every;
  std::printf("epoch,lr,mean_loss\n");
  fit(pairs, model, opt, [&](int epoch, double lr, double loss) {
    std::printf("%d,%.9g,%.9g\n", epoch, lr, loss);
    std::fflush(stdout);
    if (opt.checkpoint_every > 0 && (epoch + 1) % opt.checkpoint_every == 0) write_checkpoint(a.out_params, model);
  });
  write_checkpoint(a.out_params, model);
}

// --- eval -------------------------------------------------------------------

void run_eval(const std::string& gt_path, const std::string& result_path) {
  const auto gt = to_gt_boxes(read_mot(gt_path));
  const auto pred = to_pred_boxes(read_mot(result_path));
  const EvalSummary s = evaluate(gt, pred);
  std::printf("MOTA,IDF1,MT,ML,FP,FN,IDSW\n%.6f,%.6f,%.6f,%.6f,%zu,%zu,%zu\n", s.mota, s.idf1, s.mt, s.ml, s.fp,
              s.fn, s.idsw);
}

// --- synth ------------------------------------------------------------------

void run_synth(const std::string& spec, const std::string& out_dir, std::uint64_t seed, int count, bool maps) {
  const std::string text = spec.empty() ? std::string(R"({"random": {}})") : read_text(spec);
  for (int n = 0; n < count; ++n) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(n);
    std::string dir = out_dir;
    if (count > 1) {
      char name[32];
      std::snprintf(name, sizeof(name), "seq_%06llu", static_cast<unsigned long long>(s));
      dir = (fs::path(out_dir) / name).string();
    }
    write_scenario(gen_scenario(parse_scenario(text, s), s), dir, maps);
  }
}

// --- flow -------------------------------------------------------------------

Point2 parse_point(const std::string& s) {
  Point2 p;
  char comma = 0;
  std::istringstream in(s);
  if (!(in >> p.x >> comma >> p.y) || comma != ',' || !in.eof()) {
    throw CLI::ValidationError("--points", "expected x,y got '" + s + "'");
  }
  return p;
}

void run_flow(const std::string& prev, const std::string& curr, const std::vector<std::string>& points,
              const std::string& config) {
  const AppConfig cfg = load_config(config);
  const FlowPair pair(read_pgm(prev), read_pgm(curr), cfg.tracker.flow);
  std::printf("x,y,dx,dy,converged\n");
  for (const auto& s : points) {
    const Point2 p = parse_point(s);
    const FlowResult r = pair.track(p);
    std::printf("%g,%g,%.6f,%.6f,%d\n", p.x, p.y, r.dx, r.dy, r.converged ? 1 : 0);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TPAGT association pipeline: tracking, training, evaluation and synthetic data"};
  app.require_subcommand(1);

  TrackArgs track;
  auto* t = app.add_subcommand("track", "Associate detections over a frame sequence");
  t->add_option("--dets", track.dets, "MOT detection file")->required();
  t->add_option("--frames", track.frames, "directory of PGM frames, read in name order")->required();
  t->add_option("--map-dir", track.map_dir, "directory of FTEN feature maps (default: the frames)");
  t->add_option("--params", track.params, "AGNN checkpoint")->required();
  t->add_option("--config", track.config, "key = value config file");
  t->add_option("--out", track.out, "result file")->required();
  t->add_option("--resize", track.resize, "resize frames to WxH before tracking")
      ->check(CLI::Validator(
          [](std::string& v) { return parse_size(v) ? std::string() : "expected WxH, got '" + v + "'"; }, "WxH"));

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Fit the AGNN on labeled sequences");
  tr->add_option("--data", train.data, "sequence directories (frames/, labels.txt or gt.txt, optional maps/) or their parents")
      ->required();
  tr->add_option("--config", train.config, "key = value config file");
  tr->add_option("--out-params", train.out_params, "checkpoint to write")->required();
  tr->add_option("--init-params", train.init_params, "start from this checkpoint");
  tr->add_option("--epochs", train.epochs, "epochs; also the length of the cosine schedule")
      ->check(CLI::PositiveNumber);
  tr->add_option("--jobs", train.jobs, "sequences prepared in parallel")->check(CLI::PositiveNumber);
  tr->add_option("--min-visibility", train.min_visibility, "skip gt rows less visible than this");

  std::string gt_path, result_path;
  auto* ev = app.add_subcommand("eval", "Score a result file against ground truth");
  ev->add_option("--gt", gt_path, "ground-truth file")->required();
  ev->add_option("--result", result_path, "tracker output")->required();

  std::string spec, out_dir;
  std::uint64_t seed = 1;
  int count = 1;
  bool no_maps = false;
  auto* sy = app.add_subcommand("synth", "Render a synthetic scenario with gt and detections");
  sy->add_option("--spec", spec, "scenario JSON (default: one random 4-object scenario)");
  sy->add_option("--out-dir", out_dir, "output directory")->required();
  sy->add_option("--seed", seed, "random seed");
  sy->add_option("--count", count, "number of scenarios, seeds seed..seed+count-1")->check(CLI::PositiveNumber);
  sy->add_flag("--no-maps", no_maps, "skip FTEN feature maps");

  std::string prev, curr, flow_config;
  std::vector<std::string> points;
  auto* fl = app.add_subcommand("flow", "Pyramidal Lucas-Kanade displacement of points");
  fl->add_option("--prev", prev, "previous PGM frame")->required();
  fl->add_option("--curr", curr, "current PGM frame")->required();
  fl->add_option("--points", points, "points as x,y")->required();
  fl->add_option("--config", flow_config, "key = value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*t) run_track(track);
    if (*tr) run_train(train);
    if (*ev) run_eval(gt_path, result_path);
    if (*sy) run_synth(spec, out_dir, seed, count, !no_maps);
    if (*fl) run_flow(prev, curr, points, flow_config);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "tpagt: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "tpagt: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tpagt: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
