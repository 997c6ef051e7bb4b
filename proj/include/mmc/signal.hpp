// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>
#include <vector>

namespace mmc {

enum class Unit { px, m, deg, m_per_s, deg_per_s };

std::string_view to_string(Unit u);

// A uniformly sampled univariate series.
struct Signal {
  std::vector<double> values;
  double fps{30.0};
  Unit unit{Unit::px};

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  double duration_s() const { return static_cast<double>(values.size()) / fps; }
};

struct Vec2 {
  double x{0.0};
  double y{0.0};
};

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

// Inclusive frame range [first, last].
struct FrameRange {
  std::size_t first{0};
  std::size_t last{0};

  std::size_t length() const { return last - first + 1; }
  bool operator==(const FrameRange&) const = default;
};

}  // namespace mmc
