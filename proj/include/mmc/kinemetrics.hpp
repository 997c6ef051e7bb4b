// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mmc/keypoints.hpp"
#include "mmc/mocap_io.hpp"
#include "mmc/signal.hpp"

namespace mmc {

struct JumpMetrics {
  double height_m{0.0};
  int rep_index{0};
};

struct VelocityMetrics {
  double peak_mps{0.0};
  double mean_mps{0.0};
  FrameRange concentric_window;
};

struct TemporalMetrics {
  double flight_s{0.0};
  double contact_s{0.0};
};

struct AngularMetrics {
  double rom_deg{0.0};
  std::optional<double> mean_ang_vel_dps;
  std::optional<double> internal_deg;
  std::optional<double> external_deg;
};

inline constexpr double kRestWindowS = 0.3;
inline constexpr double kAirborneThresholdM = 0.02;
inline constexpr double kOnsetFraction = 0.05;

// Rise of the signal maximum above the median of its first `rest_s` seconds,
// in the signal's own unit.
double rise_above_rest(const Signal& signal, double rest_s = kRestWindowS);

// Toe signal in metres, upward positive.
JumpMetrics jump_height(const Signal& toe_signal_m, double rest_s = kRestWindowS);

// Global minimum to the following global maximum.
FrameRange concentric_window(const Signal& bar_signal);

// Narrows a min-to-max window to the run of rising samples around the peak
// velocity, so flat noisy holds at either end do not count as concentric.
FrameRange refine_concentric_window(const Signal& bar_signal, FrameRange window);

// Per-sample derivative: central differences inside, one-sided at the ends.
std::vector<double> differentiate(std::span<const double> values, double fps);

VelocityMetrics velocity_metrics(const Signal& signal_m, FrameRange window);

// Sub-frame start and end of a rise between two holds, with the hold levels.
struct ConcentricEdges {
  double start_frame{0.0};
  double end_frame{0.0};
  double low{0.0};
  double high{0.0};
};

inline constexpr double kEdgeFraction = 0.1;

// Each edge is the hinge of a flat-then-quadratic least-squares fit to the raw
// samples. The fit spans from `slack` frames outside `window` to where the
// smoothed signal has covered `edge_fraction` of the rise. `window` comes
// from the smoothed signal, whose edges smoothing spreads by up to half the
// filter length; `slack` should cover that.
ConcentricEdges concentric_edges(const Signal& raw_m, const Signal& smoothed_m, FrameRange window, std::size_t slack,
                                 double edge_fraction = kEdgeFraction);

// (high - low) / (end - start) of the concentric edges.
double mean_concentric_velocity(const Signal& raw_m, const Signal& smoothed_m, FrameRange window, std::size_t slack);

// Repeated-jump flight and contact times. One entry per contact, paired with
// the flight that follows it.
std::vector<TemporalMetrics> flight_contact_rjt(const Signal& toe_signal_m,
                                                double threshold_m = kAirborneThresholdM);

struct DropJumpEvents {
  std::vector<std::size_t> speed_peaks;  // temporal order
  TemporalMetrics timing;
};

// Drop jump timing from peaks of toe speed: contact between the first two,
// flight between the last two.
DropJumpEvents dropjump_events(const Signal& toe_signal_m);
TemporalMetrics flight_contact_dropjump(const Signal& toe_signal_m);

// Drop-jump height: rest level is the ground contact between the first two
// speed peaks; height is the subsequent maximum above it.
JumpMetrics dropjump_height(const Signal& toe_signal_m);

// Acute angle (degrees) between two lines given by slopes, or nullopt where
// the slope form is singular (vertical line, perpendicular lines).
std::optional<double> acute_angle_from_slopes(double m_rest, double m_moved);

// Angle between two vectors, degrees in [0, 180].
double vector_angle_deg(Vec2 a, Vec2 b);

// Acute intersection angle of the lines along `rest` and `moved`, degrees in
// [0, 90]. Uses the slope form where it is well conditioned and the vector
// form otherwise.
double line_intersection_angle_deg(Vec2 rest, Vec2 moved);

// Mean knee-to-ankle vector and ankle x over a rest window.
struct TibiaRest {
  Vec2 tibia;
  double ankle_x{0.0};
};

TibiaRest tibia_rest(std::span<const Vec2> knee_xy, std::span<const Vec2> ankle_xy, FrameRange rest_window);

AngularMetrics hip_rotation_rom(std::span<const Vec2> knee_xy, std::span<const Vec2> ankle_xy,
                                FrameRange rest_window, Side dominant_side);
AngularMetrics hip_rotation_rom(std::span<const Vec2> knee_xy, std::span<const Vec2> ankle_xy, const TibiaRest& rest,
                                Side dominant_side);

// Per-frame angle at `joint` between the proximal and distal segments.
Signal joint_angle_series(std::span<const Vec2> proximal_xy, std::span<const Vec2> joint_xy,
                          std::span<const Vec2> distal_xy, double fps);

// Per-frame angle between the from->to vector and its mean over the rest
// window.
Signal displacement_angle_series(std::span<const Vec2> from_xy, std::span<const Vec2> to_xy,
                                 FrameRange rest_window, double fps);

AngularMetrics rom_from_angle_series(const Signal& angle_deg, FrameRange rest_window);
AngularMetrics rom_from_angle_series(const Signal& angle_deg, double rest_deg);

double mean_angular_velocity(const Signal& angle_deg);

// Reference timings from a vertical force trace.
struct ForcePlateEvents {
  std::vector<double> flights_s;   // complete airborne phases, temporal order
  std::vector<double> contacts_s;  // contact phases bounded by two flights
  std::vector<std::size_t> flight_starts;
};

ForcePlateEvents forceplate_events(const ForcePlateRecord& record, double threshold_n = 20.0);

// Flight-time method.
constexpr double jump_height_from_flight(double flight_s) {
  return 9.80665 * flight_s * flight_s / 8.0;
}

}  // namespace mmc
