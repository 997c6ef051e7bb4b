// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

#include "mmc/keypoints.hpp"
#include "mmc/signal.hpp"

namespace mmc {

inline constexpr double kGravity = 9.80665;  // m/s^2
inline constexpr double kShoulderToToeFraction = 6.0 / 8.0;
inline constexpr double kBarbellLengthM = 1.125;

enum class PtmMethod { gravity, height, object };

std::string_view to_string(PtmMethod m);
PtmMethod ptm_method_from_string(std::string_view s);

// Pixel-to-metre conversion factor.
struct PtmScale {
  double metres_per_pixel{0.0};
  PtmMethod method{PtmMethod::object};
  double fit_residual{0.0};  // gravity method only
};

struct GravityFit {
  std::size_t apex_index{0};
  FrameRange fall_window;
  FrameRange fit_window;  // fall_window mirrored about the apex
  std::size_t landing_index{0};
  double quadratic_coeff{0.0};  // px/s^2, downward
  double g{kGravity};
  double residual{0.0};         // RMS residual / pixel fall distance
};

enum class GravityMode {
  // Least-squares parabola over the flight, mirrored about the apex.
  fit,
  // One ratio d_m(t) / d_px(t) at the last frame of the descent window.
  single_ratio,
};

struct GravityOptions {
  GravityMode mode{GravityMode::fit};
  std::size_t landing_margin{2};
  std::size_t min_window{4};
  double max_residual{0.1};
};

// Free-fall distance from rest after t seconds.
constexpr double free_fall_distance_m(double t_s) { return kGravity * t_s * t_s / 2.0; }

// d_m(t) / d_px for a single measured fall.
double ptm_gravity_single_ratio(double fall_px, double t_s);

// Locates the flight apex and the landing impact of an upward-positive pixel
// trajectory and fits the free-fall parabola between them.
GravityFit fit_free_fall(const Signal& com_signal_px, const GravityOptions& options = {});

PtmScale ptm_from_gravity(const Signal& com_signal_px, const GravityOptions& options = {});

// Full standing height in pixels from a shoulder-to-toe distance.
constexpr double full_height_from_shoulder_to_toe(double shoulder_to_toe_px) {
  return shoulder_to_toe_px / kShoulderToToeFraction;
}

// Uses the median shoulder-to-toe distance over the first `rest_s` seconds.
PtmScale ptm_from_height(const KeypointSeries& series, double height_m, double rest_s = 0.5);

PtmScale ptm_from_object(double object_len_px, double object_len_m);

// px -> m. Throws UnitError for any other input unit.
Signal apply_scale(const Signal& signal_px, const PtmScale& ptm);

}  // namespace mmc
