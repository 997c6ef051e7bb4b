// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/kinemetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "mmc/errors.hpp"
#include "mmc/preprocess.hpp"

namespace mmc {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = (m + *std::max_element(v.begin(), mid)) / 2.0;
  return m;
}

void require_metres(const Signal& s, const char* what) {
  if (s.unit != Unit::m) throw UnitError(fmt::format("{} expects a signal in metres, got {}", what, to_string(s.unit)));
}

void check_window(FrameRange w, std::size_t n, const char* what) {
  if (w.last < w.first || w.last >= n) {
    throw ValidationError(fmt::format("{} [{}, {}] outside a signal of {} samples", what, w.first, w.last, n));
  }
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

}  // namespace

// ---------------------------------------------------------------------------
// Jump height

double rise_above_rest(const Signal& signal, double rest_s) {
  if (signal.empty()) throw QualityError("empty signal");
  const auto& v = signal.values;
  const auto rest = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(rest_s * signal.fps)), 1, v.size());
  const double rest_level = median_of(std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rest)));
  const auto peak = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  if (peak < rest) throw QualityError("signal maximum lies in the rest window");
  return v[peak] - rest_level;
}

JumpMetrics jump_height(const Signal& toe_signal_m, double rest_s) {
  require_metres(toe_signal_m, "jump_height");
  return {rise_above_rest(toe_signal_m, rest_s), 0};
}

// ---------------------------------------------------------------------------
// Velocity

FrameRange concentric_window(const Signal& s) {
  if (s.empty()) throw QualityError("empty signal");
  const auto& v = s.values;
  const auto hi = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  const double lo_value = *std::min_element(v.begin(), v.end());
  if (lo_value == v[hi]) throw QualityError("constant signal has no concentric phase");
  // Latest occurrence of the minimum that still precedes the maximum.
  std::optional<std::size_t> lo;
  for (std::size_t i = 0; i < hi; ++i) {
    if (v[i] == lo_value) lo = i;
  }
  if (!lo) throw QualityError("signal maximum precedes its minimum (malformed repetition)");
  return {*lo, hi};
}

std::vector<double> differentiate(std::span<const double> x, double fps) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (x[1] - x[0]) * fps;
  d[n - 1] = (x[n - 1] - x[n - 2]) * fps;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) * fps / 2.0;
  return d;
}

FrameRange refine_concentric_window(const Signal& s, FrameRange window) {
  check_window(window, s.size(), "concentric window");
  if (window.length() < 3) return window;
  const std::span<const double> part(s.values.data() + window.first, window.length());
  const auto v = differentiate(part, s.fps);
  const auto peak = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  if (!(v[peak] > 0.0)) return window;
  std::size_t lo = peak;
  std::size_t hi = peak;
  while (lo > 0 && v[lo - 1] > 0.0) --lo;
  while (hi + 1 < v.size() && v[hi + 1] > 0.0) ++hi;
  return {window.first + lo, window.first + hi};
}

VelocityMetrics velocity_metrics(const Signal& signal_m, FrameRange window) {
  require_metres(signal_m, "velocity_metrics");
  if (!(signal_m.fps > 0.0)) throw ValidationError("fps must be positive");
  check_window(window, signal_m.size(), "concentric window");
  if (window.length() < 3) throw QualityError("concentric window shorter than 3 frames");
  const std::span<const double> part(signal_m.values.data() + window.first, window.length());
  const auto v = differentiate(part, signal_m.fps);
  VelocityMetrics out;
  out.peak_mps = *std::max_element(v.begin(), v.end());
  // Time average over the window (trapezoid rule), so the end samples count
  // for half an interval each.
  const double total = std::accumulate(v.begin(), v.end(), 0.0) - (v.front() + v.back()) / 2.0;
  out.mean_mps = total / static_cast<double>(v.size() - 1);
  out.concentric_window = window;
  return out;
}

namespace {

struct Hinge {
  double t0{0.0};
  double level{0.0};
  double sse{std::numeric_limits<double>::infinity()};
};

// x = level + a * max(0, dir * (t - t0))^2 over samples [first, last], with
// t0 scanned on a 1/20-frame grid across the same span.
Hinge fit_hinge(std::span<const double> x, std::size_t first, std::size_t last, double dir) {
  constexpr double kStep = 0.05;
  Hinge best;
  const auto steps = static_cast<std::size_t>(std::lround(static_cast<double>(last - first) / kStep));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t0 = static_cast<double>(first) + kStep * static_cast<double>(k);
    auto basis = [&](std::size_t i) {
      const double d = dir * (static_cast<double>(i) - t0);
      return d > 0.0 ? d * d : 0.0;
    };
    double n = 0.0, sz = 0.0, szz = 0.0, sx = 0.0, szx = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
      const double z = basis(i);
      n += 1.0;
      sz += z;
      szz += z * z;
      sx += x[i];
      szx += z * x[i];
    }
    const double det = n * szz - sz * sz;
    if (!(det > 0.0)) continue;
    const double a = (n * szx - sz * sx) / det;
    const double c = (sx - a * sz) / n;
    double sse = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
      const double r = x[i] - c - a * basis(i);
      sse += r * r;
    }
    if (sse < best.sse) best = {t0, c, sse};
  }
  return best;
}

}  // namespace

ConcentricEdges concentric_edges(const Signal& raw_m, const Signal& smoothed_m, FrameRange window, std::size_t slack,
                                 double edge_fraction) {
  require_metres(raw_m, "concentric_edges");
  if (raw_m.size() != smoothed_m.size()) throw ValidationError("raw and smoothed signals differ in length");
  if (!(edge_fraction > 0.0 && edge_fraction < 0.5)) throw ValidationError("edge_fraction must lie in (0, 0.5)");
  check_window(window, raw_m.size(), "concentric window");
  const auto& sm = smoothed_m.values;
  const double lo = sm[window.first];
  const double hi = sm[window.last];
  const double rise = hi - lo;
  if (!(rise > 0.0)) throw QualityError("no rise in the concentric window");

  std::size_t inner_start = window.first;
  while (inner_start < window.last && sm[inner_start] < lo + edge_fraction * rise) ++inner_start;
  std::size_t inner_end = window.last;
  while (inner_end > window.first && sm[inner_end] > hi - edge_fraction * rise) --inner_end;
  const std::size_t outer_start = window.first > slack ? window.first - slack : 0;
  const std::size_t outer_end = std::min(window.last + slack, raw_m.size() - 1);
  if (inner_start < outer_start + 2 || outer_end < inner_end + 2) throw QualityError("concentric edges too short to fit");

  const auto on = fit_hinge(raw_m.values, outer_start, inner_start, 1.0);
  const auto off = fit_hinge(raw_m.values, inner_end, outer_end, -1.0);
  if (!std::isfinite(on.sse) || !std::isfinite(off.sse) || !(off.t0 > on.t0) || !(off.level > on.level)) {
    throw QualityError("concentric edge fit failed");
  }
  return {on.t0, off.t0, on.level, off.level};
}

double mean_concentric_velocity(const Signal& raw_m, const Signal& smoothed_m, FrameRange window, std::size_t slack) {
  const auto e = concentric_edges(raw_m, smoothed_m, window, slack);
  return (e.high - e.low) * raw_m.fps / (e.end_frame - e.start_frame);
}

// ---------------------------------------------------------------------------
// Temporal

std::vector<TemporalMetrics> flight_contact_rjt(const Signal& toe_signal_m, double threshold_m) {
  require_metres(toe_signal_m, "flight_contact_rjt");
  const auto& v = toe_signal_m.values;
  const std::size_t n = v.size();
  if (n < 3) throw QualityError("signal too short");

  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t decile = std::max<std::size_t>(1, (n + 9) / 10);
  const double ground = median_of(std::vector<double>(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(decile)));
  const double thr = ground + threshold_m;

  // Complete airborne runs, with threshold crossings interpolated between
  // samples.
  struct Run {
    double up;
    double down;
  };
  std::vector<Run> runs;
  std::size_t i = 0;
  while (i < n) {
    if (!(v[i] > thr)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && v[j + 1] > thr) ++j;
    if (i > 0 && j + 1 < n) {
      const double up = static_cast<double>(i - 1) + (thr - v[i - 1]) / (v[i] - v[i - 1]);
      const double down = static_cast<double>(j) + (v[j] - thr) / (v[j] - v[j + 1]);
      runs.push_back({up, down});
    }
    i = j + 1;
  }
  if (runs.size() < 2) {
    throw QualityError(fmt::format("repeated-jump signal has {} complete airborne runs, need 2", runs.size()));
  }
  std::vector<TemporalMetrics> out;
  for (std::size_t k = 0; k + 1 < runs.size(); ++k) {
    out.push_back({(runs[k + 1].down - runs[k + 1].up) / toe_signal_m.fps,
                   (runs[k + 1].up - runs[k].down) / toe_signal_m.fps});
  }
  return out;
}

DropJumpEvents dropjump_events(const Signal& toe_signal_m) {
  const auto& z = toe_signal_m.values;
  const std::size_t n = z.size();
  if (n < 5) throw QualityError("signal too short");
  const double fps = toe_signal_m.fps;

  // Speed over each sample interval [k, k+1].
  std::vector<double> speed(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) speed[k] = std::abs(z[k + 1] - z[k]) * fps;
  const double top = *std::max_element(speed.begin(), speed.end());
  if (!(top > 0.0)) throw QualityError("toe does not move");

  auto peaks = find_peaks(speed, 0.2 * top, 0.1 * fps);
  if (peaks.size() < 3) {
    throw QualityError(fmt::format("found {} toe speed peaks, need 3 (landing, push-off, landing)", peaks.size()));
  }
  if (peaks.size() > 3) {
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.prominence > b.prominence; });
    peaks.resize(3);
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.index < b.index; });
  }

  auto at = [&](std::ptrdiff_t k) {
    return (k < 0 || k >= static_cast<std::ptrdiff_t>(speed.size())) ? top : speed[static_cast<std::size_t>(k)];
  };
  // A speed peak is the last (or first) full interval of a ballistic phase;
  // the event sits in the neighbouring interval on the side where the speed
  // collapses, at the fraction of that interval still spent moving.
  auto event_time = [&](std::size_t k) {
    const auto i = static_cast<std::ptrdiff_t>(k);
    const double peak = speed[k];
    const double right = std::min(at(i + 1), at(i + 2));
    const double left = std::min(at(i - 1), at(i - 2));
    if (right < left) return (static_cast<double>(k) + 1.0 + std::min(at(i + 1) / peak, 1.0)) / fps;
    return (static_cast<double>(k) - std::min(at(i - 1) / peak, 1.0)) / fps;
  };

  DropJumpEvents ev;
  std::vector<double> times;
  for (const auto& p : peaks) {
    ev.speed_peaks.push_back(p.index);
    times.push_back(event_time(p.index));
  }
  ev.timing.contact_s = times[1] - times[0];
  ev.timing.flight_s = times[times.size() - 1] - times[times.size() - 2];
  return ev;
}

TemporalMetrics flight_contact_dropjump(const Signal& toe_signal_m) { return dropjump_events(toe_signal_m).timing; }

JumpMetrics dropjump_height(const Signal& toe_signal_m) {
  require_metres(toe_signal_m, "dropjump_height");
  const auto ev = dropjump_events(toe_signal_m);
  const auto& z = toe_signal_m.values;
  const std::size_t land = ev.speed_peaks[0] + 1;
  const std::size_t push = ev.speed_peaks[1];
  if (push <= land) throw QualityError("no ground contact between drop and push-off");
  const double ground = median_of(std::vector<double>(z.begin() + static_cast<std::ptrdiff_t>(land),
                                                      z.begin() + static_cast<std::ptrdiff_t>(push) + 1));
  const double apex = *std::max_element(z.begin() + static_cast<std::ptrdiff_t>(push), z.end());
  return {apex - ground, 0};
}

// ---------------------------------------------------------------------------
// Angles

std::optional<double> acute_angle_from_slopes(double m_rest, double m_moved) {
  if (!std::isfinite(m_rest) || !std::isfinite(m_moved)) return std::nullopt;
  const double denom = 1.0 + m_moved * m_rest;
  if (std::abs(denom) <= 1e-12 * (1.0 + std::abs(m_moved * m_rest))) return std::nullopt;
  return std::atan(std::abs((m_moved - m_rest) / denom)) * kRadToDeg;
}

double vector_angle_deg(Vec2 a, Vec2 b) {
  if (norm(a) == 0.0 || norm(b) == 0.0) throw ValidationError("angle of a zero-length vector");
  // atan2(|a x b|, a.b) equals arccos(a.b / |a||b|) and stays accurate near
  // 0 and 180 degrees.
  const double cross = a.x * b.y - a.y * b.x;
  const double dot = a.x * b.x + a.y * b.y;
  return std::atan2(std::abs(cross), dot) * kRadToDeg;
}

double line_intersection_angle_deg(Vec2 rest, Vec2 moved) {
  if (rest.x != 0.0 && moved.x != 0.0) {
    if (auto a = acute_angle_from_slopes(rest.y / rest.x, moved.y / moved.x)) return *a;
  }
  const double theta = vector_angle_deg(rest, moved);
  return theta > 90.0 ? 180.0 - theta : theta;
}

TibiaRest tibia_rest(std::span<const Vec2> knee, std::span<const Vec2> ankle, FrameRange rest_window) {
  if (knee.size() != ankle.size()) throw ValidationError("knee and ankle trajectories differ in length");
  check_window(rest_window, knee.size(), "rest window");
  TibiaRest rest;
  for (std::size_t t = rest_window.first; t <= rest_window.last; ++t) {
    rest.tibia = rest.tibia + (ankle[t] - knee[t]);
    rest.ankle_x += ankle[t].x;
  }
  const double count = static_cast<double>(rest_window.length());
  rest.tibia = (1.0 / count) * rest.tibia;
  rest.ankle_x /= count;
  return rest;
}

AngularMetrics hip_rotation_rom(std::span<const Vec2> knee, std::span<const Vec2> ankle, FrameRange rest_window,
                                Side dominant_side) {
  return hip_rotation_rom(knee, ankle, tibia_rest(knee, ankle, rest_window), dominant_side);
}

AngularMetrics hip_rotation_rom(std::span<const Vec2> knee, std::span<const Vec2> ankle, const TibiaRest& rest,
                                Side dominant_side) {
  if (knee.size() != ankle.size()) throw ValidationError("knee and ankle trajectories differ in length");
  const Vec2 rest_tibia = rest.tibia;
  const double rest_ankle_x = rest.ankle_x;
  if (norm(rest_tibia) == 0.0) throw QualityError("tibia has zero length at rest");

  // Image x grows toward the participant's left when facing the camera, so
  // internal rotation moves the right ankle toward -x and the left toward +x.
  const double internal_sign = dominant_side == Side::right ? -1.0 : 1.0;
  double internal = 0.0;
  double external = 0.0;
  for (std::size_t t = 0; t < knee.size(); ++t) {
    const Vec2 tibia = ankle[t] - knee[t];
    if (norm(tibia) == 0.0) continue;
    const double theta = line_intersection_angle_deg(rest_tibia, tibia);
    const double dx = ankle[t].x - rest_ankle_x;
    if (dx * internal_sign > 0.0) {
      internal = std::max(internal, theta);
    } else if (dx * internal_sign < 0.0) {
      external = std::max(external, theta);
    }
  }
  AngularMetrics out;
  out.internal_deg = internal;
  out.external_deg = external;
  out.rom_deg = internal + external;
  return out;
}

namespace {

Signal fill_masked(std::vector<double> values, double fps) {
  if (!fill_gaps(values)) throw QualityError("every frame has a zero-length segment");
  return {std::move(values), fps, Unit::deg};
}

}  // namespace

Signal joint_angle_series(std::span<const Vec2> proximal, std::span<const Vec2> joint, std::span<const Vec2> distal,
                          double fps) {
  if (proximal.size() != joint.size() || joint.size() != distal.size()) {
    throw ValidationError("joint trajectories differ in length");
  }
  std::vector<double> out(joint.size());
  for (std::size_t t = 0; t < joint.size(); ++t) {
    const Vec2 f = proximal[t] - joint[t];
    const Vec2 d = distal[t] - joint[t];
    out[t] = (norm(f) == 0.0 || norm(d) == 0.0) ? std::numeric_limits<double>::quiet_NaN() : vector_angle_deg(f, d);
  }
  return fill_masked(std::move(out), fps);
}

Signal displacement_angle_series(std::span<const Vec2> from, std::span<const Vec2> to, FrameRange rest_window,
                                 double fps) {
  if (from.size() != to.size()) throw ValidationError("trajectories differ in length");
  check_window(rest_window, from.size(), "rest window");
  Vec2 rest{};
  for (std::size_t t = rest_window.first; t <= rest_window.last; ++t) rest = rest + (to[t] - from[t]);
  if (norm(rest) == 0.0) throw QualityError("segment has zero length at rest");
  std::vector<double> out(from.size());
  for (std::size_t t = 0; t < from.size(); ++t) {
    const Vec2 v = to[t] - from[t];
    out[t] = norm(v) == 0.0 ? std::numeric_limits<double>::quiet_NaN() : vector_angle_deg(rest, v);
  }
  return fill_masked(std::move(out), fps);
}

AngularMetrics rom_from_angle_series(const Signal& angle, FrameRange rest_window) {
  if (angle.empty()) throw ValidationError("empty rest window");
  check_window(rest_window, angle.size(), "rest window");
  double rest = 0.0;
  for (std::size_t t = rest_window.first; t <= rest_window.last; ++t) rest += angle.values[t];
  return rom_from_angle_series(angle, rest / static_cast<double>(rest_window.length()));
}

AngularMetrics rom_from_angle_series(const Signal& angle, double rest_deg) {
  if (angle.empty()) throw ValidationError("empty angle signal");
  double rom = 0.0;
  for (double v : angle.values) rom = std::max(rom, std::abs(v - rest_deg));
  AngularMetrics out;
  out.rom_deg = rom;
  return out;
}

double mean_angular_velocity(const Signal& angle) {
  if (angle.size() < 2) throw QualityError("angle signal too short");
  auto omega = differentiate(angle.values, angle.fps);
  for (auto& w : omega) w = std::abs(w);
  const auto peak = static_cast<std::size_t>(std::max_element(omega.begin(), omega.end()) - omega.begin());
  const double top = omega[peak];
  if (!(top > 0.0)) throw QualityError("angular velocity is identically zero");
  std::size_t onset = 0;
  while (onset < peak && !(omega[onset] > kOnsetFraction * top)) ++onset;
  double sum = 0.0;
  for (std::size_t t = onset; t <= peak; ++t) sum += omega[t];
  return sum / static_cast<double>(peak - onset + 1);
}

// ---------------------------------------------------------------------------
// Force plate

ForcePlateEvents forceplate_events(const ForcePlateRecord& record, double threshold_n) {
  const auto& f = record.vertical_force;
  const std::size_t n = f.size();
  struct Run {
    std::size_t first, last;
    bool airborne;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < n;) {
    const bool air = f[i] < threshold_n;
    std::size_t j = i;
    while (j + 1 < n && (f[j + 1] < threshold_n) == air) ++j;
    runs.push_back({i, j, air});
    i = j + 1;
  }
  ForcePlateEvents ev;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const double dur = static_cast<double>(run.last - run.first + 1) / record.fps;
    if (run.airborne) {
      if (run.first > 0 && run.last + 1 < n) {
        ev.flights_s.push_back(dur);
        ev.flight_starts.push_back(run.first);
      }
    } else if (r > 0 && r + 1 < runs.size()) {
      ev.contacts_s.push_back(dur);
    }
  }
  return ev;
}

}  // namespace mmc
