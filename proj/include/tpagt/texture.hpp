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

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tpagt {

/// Multi-octave value noise: a continuous, seeded intensity field used to
/// paint synthetic objects and backgrounds.
class ValueNoise {
 public:
  struct Octave {
    double cell = 8.0;  // lattice spacing in pixels
    double amplitude = 1.0;
  };

  ValueNoise(std::uint64_t seed, std::vector<Octave> octaves, int lattice = 64)
      : octaves_(std::move(octaves)), lattice_(lattice) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    values_.resize(octaves_.size());
    for (auto& grid : values_) {
      grid.resize(static_cast<std::size_t>(lattice_) * lattice_);
      for (double& v : grid) v = uni(rng);
    }
    for (const auto& o : octaves_) norm_ += o.amplitude;
    if (norm_ <= 0.0) norm_ = 1.0;
  }

  /// 1/f octave mix from 64 px blobs down to 8 px detail, roughly in [-1, 1].
  static ValueNoise textured(std::uint64_t seed) {
    return ValueNoise(seed, {{64.0, 1.0}, {32.0, 0.5}, {16.0, 0.25}, {8.0, 0.125}});
  }

  /// Blobs a few cells across an object box, so pooled patches differ.
  static ValueNoise patterned(std::uint64_t seed) { return ValueNoise(seed, {{20.0, 1.0}, {10.0, 0.5}}); }

  double operator()(double x, double y) const {
    double acc = 0.0;
    for (std::size_t o = 0; o < octaves_.size(); ++o) {
      acc += octaves_[o].amplitude * lattice_value(values_[o], x / octaves_[o].cell, y / octaves_[o].cell);
    }
    return acc / norm_;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

  double lattice_value(const std::vector<double>& grid, double u, double v) const {
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double tu = smooth(u - fu);
    const double tv = smooth(v - fv);
    auto wrap = [this](double c) {
      auto i = static_cast<std::int64_t>(c) % lattice_;
      return static_cast<std::size_t>(i < 0 ? i + lattice_ : i);
    };
    const std::size_t x0 = wrap(fu), x1 = wrap(fu + 1.0);
    const std::size_t y0 = wrap(fv), y1 = wrap(fv + 1.0);
    const auto L = static_cast<std::size_t>(lattice_);
    const double a = grid[y0 * L + x0], b = grid[y0 * L + x1];
    const double c = grid[y1 * L + x0], d = grid[y1 * L + x1];
    return (1.0 - tv) * ((1.0 - tu) * a + tu * b) + tv * ((1.0 - tu) * c + tu * d);
  }

  std::vector<Octave> octaves_;
  int lattice_;
  std::vector<std::vector<double>> values_;
  double norm_ = 0.0;
};

}  // namespace tpagt
