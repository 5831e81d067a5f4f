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

#include <tpagt/bytes.hpp>
#include <tpagt/core.hpp>
#include <tpagt/flow.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tpagt {

/// C x H x W feature map; cell (x, y) covers image pixels [x*stride, (x+1)*stride).
struct FeatureMap {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  double stride = 1.0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(std::uint32_t c, std::uint32_t h, std::uint32_t w, double s, float fill = 0.0f)
      : channels(c), height(h), width(w), stride(s),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  float at(std::uint32_t c, std::int64_t y, std::int64_t x) const {
    return data[(static_cast<std::size_t>(c) * height + static_cast<std::size_t>(y)) * width +
                static_cast<std::size_t>(x)];
  }
  float& at(std::uint32_t c, std::int64_t y, std::int64_t x) {
    return data[(static_cast<std::size_t>(c) * height + static_cast<std::size_t>(y)) * width +
                static_cast<std::size_t>(x)];
  }

  bool valid() const {
    return channels >= 1 && height >= 1 && width >= 1 && stride > 0.0 && std::isfinite(stride) &&
           data.size() == static_cast<std::size_t>(channels) * height * width &&
           std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
  }

  /// The raw frame as a one-channel, stride-1 map.
  static FeatureMap from_frame(const GrayFrame& frame) {
    FeatureMap m;
    m.channels = 1;
    m.height = frame.height;
    m.width = frame.width;
    m.stride = 1.0;
    m.data = frame.data;
    return m;
  }
};

struct EmbedParams {
  std::uint32_t channels = 1;
  std::uint32_t pool = 7;
  std::uint32_t dim = 256;
  Matrix projection;  // (channels*pool*pool) x dim
  Vector bias;        // dim

  std::size_t input_size() const { return static_cast<std::size_t>(channels) * pool * pool; }

  /// uniform(-1/sqrt(fanin), 1/sqrt(fanin)) for both projection and bias.
  static EmbedParams init(std::uint32_t channels, std::uint32_t pool, std::uint32_t dim,
                          std::uint64_t seed) {
    EmbedParams p;
    p.channels = channels;
    p.pool = pool;
    p.dim = dim;
    const auto fanin = static_cast<Eigen::Index>(p.input_size());
    const double bound = 1.0 / std::sqrt(static_cast<double>(fanin));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-bound, bound);
    p.projection.resize(fanin, dim);
    for (Eigen::Index i = 0; i < p.projection.size(); ++i) p.projection.data()[i] = uni(rng);
    p.bias.resize(dim);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias[i] = uni(rng);
    return p;
  }

  bool consistent() const {
    return projection.rows() == static_cast<Eigen::Index>(input_size()) &&
           projection.cols() == static_cast<Eigen::Index>(dim) &&
           bias.size() == static_cast<Eigen::Index>(dim);
  }
};

/// ROI Align with a fixed 2x2 sampling grid per bin. Box coordinates are in
/// image pixels; cell centers sit at (i + 0.5) * stride. Samples falling
/// outside the map are clamped to the border.
inline Vector roi_align(const FeatureMap& map, const BBox& b, std::uint32_t pool) {
  if (!map.valid()) throw Error(ErrorCode::EmptyMap, "feature map has invalid shape");
  if (pool == 0) throw Error(ErrorCode::InvalidArgument, "pool must be positive");
  if (!b.valid()) throw Error(ErrorCode::NonPositiveBox, "roi must have positive area");

  constexpr int kSamples = 2;
  const double x0 = b.left / map.stride - 0.5;
  const double y0 = b.top / map.stride - 0.5;
  const double bin_w = b.width / map.stride / pool;
  const double bin_h = b.height / map.stride / pool;
  const double max_x = static_cast<double>(map.width - 1);
  const double max_y = static_cast<double>(map.height - 1);

  Vector out(static_cast<Eigen::Index>(map.channels) * pool * pool);
  out.setZero();
  for (std::uint32_t py = 0; py < pool; ++py) {
    for (std::uint32_t px = 0; px < pool; ++px) {
      for (int sy = 0; sy < kSamples; ++sy) {
        const double y = std::clamp(y0 + (py + (sy + 0.5) / kSamples) * bin_h, 0.0, max_y);
        const auto ylo = static_cast<std::int64_t>(std::floor(y));
        const auto yhi = std::min<std::int64_t>(ylo + 1, map.height - 1);
        const double fy = y - static_cast<double>(ylo);
        for (int sx = 0; sx < kSamples; ++sx) {
          const double x = std::clamp(x0 + (px + (sx + 0.5) / kSamples) * bin_w, 0.0, max_x);
          const auto xlo = static_cast<std::int64_t>(std::floor(x));
          const auto xhi = std::min<std::int64_t>(xlo + 1, map.width - 1);
          const double fx = x - static_cast<double>(xlo);
          for (std::uint32_t c = 0; c < map.channels; ++c) {
            const double v = (1.0 - fy) * ((1.0 - fx) * map.at(c, ylo, xlo) + fx * map.at(c, ylo, xhi)) +
                             fy * ((1.0 - fx) * map.at(c, yhi, xlo) + fx * map.at(c, yhi, xhi));
            out[(static_cast<Eigen::Index>(c) * pool + py) * pool + px] += v;
          }
        }
      }
    }
  }
  out /= static_cast<double>(kSamples * kSamples);
  return out;
}

/// Pooled regions for a list of boxes, one row per box.
inline Matrix pool_regions(const FeatureMap& map, std::span<const BBox> boxes, std::uint32_t pool) {
  Matrix out(static_cast<Eigen::Index>(boxes.size()),
             static_cast<Eigen::Index>(map.channels) * pool * pool);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = roi_align(map, boxes[i], pool).transpose();
  }
  return out;
}

inline FeatureVector embed(const Vector& region, const EmbedParams& params) {
  if (!params.consistent() || region.size() != params.projection.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "region size does not match embedding input");
  }
  return params.projection.transpose() * region + params.bias;
}

/// Row-wise affine embedding of pooled regions.
inline FeatureMatrix embed_rows(const Matrix& regions, const EmbedParams& params) {
  if (!params.consistent() || regions.cols() != params.projection.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "region width does not match embedding input");
  }
  FeatureMatrix out = regions * params.projection;
  out.rowwise() += params.bias.transpose();
  return out;
}

struct EmbedGrads {
  Matrix projection;
  Vector bias;
};

/// Gradient of a scalar loss through embed_rows, given dL/d(features).
inline EmbedGrads embed_backward(const Matrix& regions, const Matrix& d_features) {
  if (regions.rows() != d_features.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient rows do not match regions");
  }
  return {regions.transpose() * d_features, d_features.colwise().sum().transpose()};
}

inline FeatureMatrix extract_features(const FeatureMap& map, std::span<const BBox> boxes,
                                      const EmbedParams& params) {
  if (boxes.empty()) throw Error(ErrorCode::InvalidArgument, "no boxes to extract");
  if (map.channels != params.channels) {
    throw Error(ErrorCode::ShapeMismatch, "map channels differ from embedding channels");
  }
  return embed_rows(pool_regions(map, boxes, params.pool), params);
}

// --- FTEN tensor files ----------------------------------------------------

inline std::vector<unsigned char> encode_ften(const FeatureMap& map) {
  if (!map.valid()) throw Error(ErrorCode::EmptyMap, "cannot encode invalid map");
  ByteWriter w;
  w.magic("FTEN");
  w.u32(3);
  w.u32(map.channels);
  w.u32(map.height);
  w.u32(map.width);
  w.f64(map.stride);
  for (float v : map.data) w.f32(v);
  return w.take();
}

inline FeatureMap decode_ften(std::span<const unsigned char> bytes, const std::string& what = "FTEN") {
  ByteReader r(bytes, what);
  r.expect_magic("FTEN");
  const std::uint32_t rank = r.u32();
  if (rank != 3) throw Error(ErrorCode::ParseError, what + ": expected rank 3 (C,H,W)");
  FeatureMap map;
  map.channels = r.u32();
  map.height = r.u32();
  map.width = r.u32();
  map.stride = r.f64();
  const std::size_t n = static_cast<std::size_t>(map.channels) * map.height * map.width;
  if (r.remaining() != n * 4) throw Error(ErrorCode::ParseError, what + ": data size mismatch");
  map.data.resize(n);
  for (float& v : map.data) v = r.f32();
  if (!map.valid()) throw Error(ErrorCode::EmptyMap, what + ": invalid map dimensions");
  return map;
}

inline FeatureMap read_ften(const std::string& path) { return decode_ften(read_file_bytes(path), path); }

inline void write_ften(const std::string& path, const FeatureMap& map) {
  write_file_atomic(path, encode_ften(map));
}

}  // namespace tpagt
