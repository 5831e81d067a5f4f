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

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tpagt {

/// Single-channel frame, row-major, intensities in [0,1].
struct GrayFrame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> data;

  GrayFrame() = default;
  GrayFrame(std::uint32_t w, std::uint32_t h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float at(std::int64_t x, std::int64_t y) const {
    return data[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
  }
  float& at(std::int64_t x, std::int64_t y) {
    return data[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
  }

  bool valid() const {
    if (width == 0 || height == 0) return false;
    if (data.size() != static_cast<std::size_t>(width) * height) return false;
    return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
  }

  /// Bilinear sample with coordinates clamped to the frame.
  double sample(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    const auto x0 = static_cast<std::int64_t>(std::floor(x));
    const auto y0 = static_cast<std::int64_t>(std::floor(y));
    const auto x1 = std::min<std::int64_t>(x0 + 1, width - 1);
    const auto y1 = std::min<std::int64_t>(y0 + 1, height - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
    const double bot = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
    return (1.0 - fy) * top + fy * bot;
  }
};

struct FlowConfig {
  int window = 120;  // level-0 window side in pixels
  int levels = 3;
  int max_iters = 10;
  double eps = 0.01;
};

struct FlowResult {
  double dx = 0.0;
  double dy = 0.0;
  bool converged = false;
};

/// ITU-R 601 luma of an interleaved 8-bit RGB buffer.
inline GrayFrame rgb_to_gray(std::span<const std::uint8_t> rgb, std::uint32_t width,
                             std::uint32_t height) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::ShapeMismatch, "rgb buffer size does not match dimensions");
  }
  GrayFrame out(width, height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double luma = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    out.data[i] = static_cast<float>(luma / 255.0);
  }
  return out;
}

namespace detail {

inline std::int64_t reflect101(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

inline int level_window(const FlowConfig& cfg, int level) {
  int w = std::max(15, cfg.window >> level);
  if (w % 2 == 0) ++w;
  return w;
}

}  // namespace detail

/// Gaussian pyramid: 5-tap binomial low-pass (reflect-101 borders) then 2x decimation.
inline std::vector<GrayFrame> build_pyramid(const GrayFrame& frame, int levels) {
  if (!frame.valid()) throw Error(ErrorCode::InvalidArgument, "invalid frame");
  if (levels < 1) throw Error(ErrorCode::InvalidArgument, "levels must be >= 1");

  std::uint32_t w = frame.width;
  std::uint32_t h = frame.height;
  for (int l = 1; l < levels; ++l) {
    w = (w + 1) / 2;
    h = (h + 1) / 2;
  }
  if (w < 16 || h < 16) {
    throw Error(ErrorCode::TooSmall, "pyramid level would shrink below 16 px");
  }

  static constexpr std::array<double, 5> kTaps{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  std::vector<GrayFrame> pyr;
  pyr.reserve(static_cast<std::size_t>(levels));
  pyr.push_back(frame);
  for (int l = 1; l < levels; ++l) {
    const GrayFrame& src = pyr.back();
    const std::int64_t sw = src.width;
    const std::int64_t sh = src.height;
    const auto dw = static_cast<std::uint32_t>((sw + 1) / 2);
    const auto dh = static_cast<std::uint32_t>((sh + 1) / 2);

    // Horizontal pass only at the even columns that survive decimation.
    std::vector<double> tmp(static_cast<std::size_t>(dw) * static_cast<std::size_t>(sh));
    for (std::int64_t y = 0; y < sh; ++y) {
      for (std::int64_t xd = 0; xd < dw; ++xd) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
          acc += kTaps[k + 2] * src.at(detail::reflect101(2 * xd + k, sw), y);
        }
        tmp[static_cast<std::size_t>(y * dw + xd)] = acc;
      }
    }
    GrayFrame dst(dw, dh);
    for (std::int64_t yd = 0; yd < dh; ++yd) {
      for (std::int64_t x = 0; x < dw; ++x) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
          acc += kTaps[k + 2] * tmp[static_cast<std::size_t>(detail::reflect101(2 * yd + k, sh) * dw + x)];
        }
        dst.at(x, yd) = static_cast<float>(acc);
      }
    }
    pyr.push_back(std::move(dst));
  }
  return pyr;
}

namespace detail {

struct PointTrack {
  double gx = 0.0;
  double gy = 0.0;
  bool any_level_solved = false;
  double last_step = 0.0;
};

// Bouguet-style coarse-to-fine iterative LK over prebuilt pyramids.
inline FlowResult track_point_pyramids(const std::vector<GrayFrame>& prev_pyr,
                                       const std::vector<GrayFrame>& curr_pyr, Point2 p,
                                       const FlowConfig& cfg) {
  const int levels = static_cast<int>(prev_pyr.size());
  PointTrack st;
  double nu_x = 0.0;
  double nu_y = 0.0;
  bool final_level_solved = false;

  for (int level = levels - 1; level >= 0; --level) {
    const GrayFrame& I = prev_pyr[static_cast<std::size_t>(level)];
    const GrayFrame& J = curr_pyr[static_cast<std::size_t>(level)];
    const double scale = std::ldexp(1.0, -level);
    const double px = p.x * scale;
    const double py = p.y * scale;
    const int half = level_window(cfg, level) / 2;

    const std::size_t n = static_cast<std::size_t>(2 * half + 1) * static_cast<std::size_t>(2 * half + 1);
    std::vector<double> ix(n), iy(n), iv(n);
    double gxx = 0.0, gxy = 0.0, gyy = 0.0;
    std::size_t k = 0;
    for (int wy = -half; wy <= half; ++wy) {
      for (int wx = -half; wx <= half; ++wx, ++k) {
        const double x = px + wx;
        const double y = py + wy;
        iv[k] = I.sample(x, y);
        ix[k] = 0.5 * (I.sample(x + 1.0, y) - I.sample(x - 1.0, y));
        iy[k] = 0.5 * (I.sample(x, y + 1.0) - I.sample(x, y - 1.0));
        gxx += ix[k] * ix[k];
        gxy += ix[k] * iy[k];
        gyy += iy[k] * iy[k];
      }
    }

    const double tr = gxx + gyy;
    const double det = gxx * gyy - gxy * gxy;
    const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    const bool singular = min_eig < 1e-9 * static_cast<double>(n);

    nu_x = 0.0;
    nu_y = 0.0;
    double step = std::numeric_limits<double>::infinity();
    if (!singular) {
      st.any_level_solved = true;
      for (int it = 0; it < cfg.max_iters; ++it) {
        double bx = 0.0, by = 0.0;
        k = 0;
        for (int wy = -half; wy <= half; ++wy) {
          for (int wx = -half; wx <= half; ++wx, ++k) {
            const double jv = J.sample(px + wx + st.gx + nu_x, py + wy + st.gy + nu_y);
            const double di = iv[k] - jv;
            bx += di * ix[k];
            by += di * iy[k];
          }
        }
        const double ex = (gyy * bx - gxy * by) / det;
        const double ey = (gxx * by - gxy * bx) / det;
        nu_x += ex;
        nu_y += ey;
        step = std::hypot(ex, ey);
        if (step < cfg.eps) break;
      }
    }
    if (level == 0) {
      final_level_solved = !singular;
      st.last_step = step;
      st.gx += nu_x;
      st.gy += nu_y;
    } else {
      st.gx = 2.0 * (st.gx + nu_x);
      st.gy = 2.0 * (st.gy + nu_y);
    }
  }

  FlowResult out;
  if (!st.any_level_solved) return out;
  out.dx = st.gx;
  out.dy = st.gy;
  out.converged = final_level_solved && st.last_step < cfg.eps;
  return out;
}

inline void check_flow_config(const FlowConfig& cfg) {
  if (cfg.window < 1 || cfg.levels < 1 || cfg.max_iters < 1 || !(cfg.eps > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid flow configuration");
  }
}

inline void check_point(const GrayFrame& frame, Point2 p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 ||
      p.x > static_cast<double>(frame.width - 1) || p.y > static_cast<double>(frame.height - 1)) {
    throw Error(ErrorCode::OutOfBounds, "point has no valid window in the frame");
  }
}

}  // namespace detail

/// Pyramids of a frame pair, reusable across many tracked points.
class FlowPair {
 public:
  FlowPair(const GrayFrame& prev, const GrayFrame& curr, const FlowConfig& cfg) : cfg_(cfg) {
    detail::check_flow_config(cfg);
    if (prev.width != curr.width || prev.height != curr.height) {
      throw Error(ErrorCode::ShapeMismatch, "frames differ in size");
    }
    prev_pyr_ = build_pyramid(prev, cfg.levels);
    curr_pyr_ = build_pyramid(curr, cfg.levels);
  }

  FlowResult track(Point2 p) const {
    detail::check_point(prev_pyr_.front(), p);
    return detail::track_point_pyramids(prev_pyr_, curr_pyr_, p, cfg_);
  }

  /// Box translated by the flow of its center; size unchanged. On
  /// non-convergence the input box comes back with converged=false.
  std::pair<BBox, bool> predict(const BBox& b) const {
    const FlowResult r = track(center(b));
    if (!r.converged) return {b, false};
    return {b.translated(r.dx, r.dy), true};
  }

  const FlowConfig& config() const { return cfg_; }

 private:
  FlowConfig cfg_;
  std::vector<GrayFrame> prev_pyr_;
  std::vector<GrayFrame> curr_pyr_;
};

inline FlowResult track_point(const GrayFrame& prev, const GrayFrame& curr, Point2 p,
                              const FlowConfig& cfg = {}) {
  return FlowPair(prev, curr, cfg).track(p);
}

inline std::pair<BBox, bool> predict_tracklet_bbox(const GrayFrame& prev, const GrayFrame& curr,
                                                   const BBox& b, const FlowConfig& cfg = {}) {
  return FlowPair(prev, curr, cfg).predict(b);
}

/// Bilinear resize, used by the optional --resize preprocessing.
inline GrayFrame resize(const GrayFrame& src, std::uint32_t width, std::uint32_t height) {
  GrayFrame out(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (std::uint32_t y = 0; y < height; ++y) {
    for (std::uint32_t x = 0; x < width; ++x) {
      out.at(x, y) = static_cast<float>(src.sample((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5));
    }
  }
  return out;
}

// --- PGM (P5, 8-bit) ------------------------------------------------------

namespace detail {

inline std::string pgm_token(std::istream& in) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace detail

inline GrayFrame read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  if (detail::pgm_token(in) != "P5") throw Error(ErrorCode::ParseError, path + ": not a P5 PGM");
  unsigned long w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(detail::pgm_token(in));
    h = std::stoul(detail::pgm_token(in));
    maxval = std::stoul(detail::pgm_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, path + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
    throw Error(ErrorCode::ParseError, path + ": only 8-bit PGM is supported");
  }
  GrayFrame frame(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h));
  std::vector<unsigned char> raw(frame.data.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error(ErrorCode::ParseError, path + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < raw.size(); ++i) frame.data[i] = static_cast<float>(raw[i] / 255.0);
  return frame;
}

inline std::vector<unsigned char> encode_pgm(const GrayFrame& frame) {
  const std::string header =
      "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(header.size() + frame.data.size());
  for (float v : frame.data) {
    out.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

/// Quantizes a frame to the 8-bit grid a PGM round trip would produce.
inline GrayFrame quantize8(const GrayFrame& frame) {
  GrayFrame out = frame;
  for (float& v : out.data) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0);
  }
  return out;
}

}  // namespace tpagt
