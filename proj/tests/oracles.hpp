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

// Reference implementations kept deliberately naive so they share no code
// paths with the library.

#include <tpagt/core.hpp>
#include <tpagt/flow.hpp>
#include <tpagt/texture.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using tpagt::BBox;
using tpagt::Matrix;

// Maximum over all injective row->column maps.
inline double brute_force_max(const Matrix& v) {
  const auto m = static_cast<int>(v.rows());
  const auto k = static_cast<int>(v.cols());
  std::vector<char> used(static_cast<std::size_t>(k), 0);
  double best = -std::numeric_limits<double>::infinity();
  std::function<void(int, double)> rec = [&](int row, double acc) {
    if (row == m) {
      best = std::max(best, acc);
      return;
    }
    for (int c = 0; c < k; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      used[static_cast<std::size_t>(c)] = 1;
      rec(row + 1, acc + v(row, c));
      used[static_cast<std::size_t>(c)] = 0;
    }
  };
  rec(0, 0.0);
  return m == 0 ? 0.0 : best;
}

// IOU by counting unit cells; exact for boxes on the integer grid.
inline double raster_iou(const BBox& a, const BBox& b) {
  const auto lo_x = static_cast<long>(std::floor(std::min(a.left, b.left)));
  const auto hi_x = static_cast<long>(std::ceil(std::max(a.right(), b.right())));
  const auto lo_y = static_cast<long>(std::floor(std::min(a.top, b.top)));
  const auto hi_y = static_cast<long>(std::ceil(std::max(a.bottom(), b.bottom())));
  long inter = 0, uni = 0;
  auto inside = [](const BBox& r, double x, double y) {
    return x > r.left && x < r.right() && y > r.top && y < r.bottom();
  };
  for (long y = lo_y; y < hi_y; ++y) {
    for (long x = lo_x; x < hi_x; ++x) {
      const bool ia = inside(a, x + 0.5, y + 0.5);
      const bool ib = inside(b, x + 0.5, y + 0.5);
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Central difference of f along every coordinate of x.
inline std::vector<double> central_diff(const std::function<double()>& f, std::vector<double*> coords,
                                        double h = 1e-5) {
  std::vector<double> out;
  out.reserve(coords.size());
  for (double* p : coords) {
    const double keep = *p;
    *p = keep + h;
    const double up = f();
    *p = keep - h;
    const double down = f();
    *p = keep;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

inline std::vector<double*> coords_of(Matrix& m) {
  std::vector<double*> out;
  for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
  return out;
}

inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1e-6, std::abs(analytic), std::abs(numeric)});
}

// Direct 5x5 separable-equivalent blur (weights 1 4 6 4 1 / 16 per axis),
// reflect-101 borders, then keep even pixels.
inline tpagt::GrayFrame blur_decimate(const tpagt::GrayFrame& src) {
  static const double k[5] = {1, 4, 6, 4, 1};
  auto refl = [](long i, long n) {
    if (n == 1) return 0L;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  const long w = src.width, h = src.height;
  tpagt::GrayFrame out(static_cast<std::uint32_t>((w + 1) / 2), static_cast<std::uint32_t>((h + 1) / 2));
  for (long y = 0; y < static_cast<long>(out.height); ++y) {
    for (long x = 0; x < static_cast<long>(out.width); ++x) {
      double acc = 0.0;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          acc += k[dy + 2] * k[dx + 2] * src.at(refl(2 * x + dx, w), refl(2 * y + dy, h));
        }
      }
      out.at(x, y) = static_cast<float>(acc / 256.0);
    }
  }
  return out;
}

// Smooth texture translated by an exact offset: frame(x, y) = tex(x - dx, y - dy).
inline tpagt::GrayFrame shifted_texture(std::uint64_t seed, std::uint32_t w, std::uint32_t h, double dx,
                                        double dy) {
  const auto tex = tpagt::ValueNoise::textured(seed);
  tpagt::GrayFrame f(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      f.at(x, y) = static_cast<float>(0.5 + 0.4 * tex(x - dx + 1000.0, y - dy + 1000.0));
    }
  }
  return f;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Error code thrown by f, or nullopt if it returns normally.
template <typename F>
std::optional<tpagt::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const tpagt::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace oracle
