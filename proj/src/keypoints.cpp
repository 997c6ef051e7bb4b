// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/keypoints.hpp"

#include <array>

#include <fmt/format.h>

#include "mmc/errors.hpp"

namespace mmc {

namespace {

constexpr std::array<std::string_view, kBody25Count> kNames = {
    "Nose",    "Neck",      "RShoulder", "RElbow", "RWrist",  "LShoulder", "LElbow",
    "LWrist",  "MidHip",    "RHip",      "RKnee",  "RAnkle",  "LHip",      "LKnee",
    "LAnkle",  "REye",      "LEye",      "REar",   "LEar",    "LBigToe",   "LSmallToe",
    "LHeel",   "RBigToe",   "RSmallToe", "RHeel"};

}  // namespace

std::string_view to_string(Unit u) {
  switch (u) {
    case Unit::px: return "px";
    case Unit::m: return "m";
    case Unit::deg: return "deg";
    case Unit::m_per_s: return "m/s";
    case Unit::deg_per_s: return "deg/s";
  }
  return "?";
}

std::string_view body25_name(Body25 kp) { return kNames.at(idx(kp)); }

std::optional<Body25> body25_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Body25>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Side s) { return s == Side::left ? "left" : "right"; }

Side side_from_string(std::string_view s) {
  if (s == "left" || s == "L" || s == "l") return Side::left;
  if (s == "right" || s == "R" || s == "r") return Side::right;
  throw ValidationError(fmt::format("invalid side '{}'", s));
}

Body25 ankle_of(Side s) { return s == Side::left ? Body25::LAnkle : Body25::RAnkle; }
Body25 knee_of(Side s) { return s == Side::left ? Body25::LKnee : Body25::RKnee; }
Body25 hip_of(Side s) { return s == Side::left ? Body25::LHip : Body25::RHip; }
Body25 big_toe_of(Side s) { return s == Side::left ? Body25::LBigToe : Body25::RBigToe; }
Body25 wrist_of(Side s) { return s == Side::left ? Body25::LWrist : Body25::RWrist; }
Body25 shoulder_of(Side s) { return s == Side::left ? Body25::LShoulder : Body25::RShoulder; }

void KeypointSeries::require_usable(Body25 kp) const {
  if (!usable[idx(kp)]) {
    throw QualityError(fmt::format("keypoint {} is unusable (never above confidence threshold)",
                                   body25_name(kp)));
  }
}

Signal KeypointSeries::vertical_px(Body25 kp) const {
  require_usable(kp);
  Signal s{{}, fps, Unit::px};
  s.values.reserve(frames.size());
  for (const auto& f : frames) s.values.push_back(-f[idx(kp)].y);
  return s;
}

Signal KeypointSeries::horizontal_px(Body25 kp) const {
  require_usable(kp);
  Signal s{{}, fps, Unit::px};
  s.values.reserve(frames.size());
  for (const auto& f : frames) s.values.push_back(f[idx(kp)].x);
  return s;
}

std::vector<Vec2> KeypointSeries::trajectory(Body25 kp) const {
  require_usable(kp);
  std::vector<Vec2> out;
  out.reserve(frames.size());
  // Flip y so that the returned plane is right-handed with "up" positive.
  for (const auto& f : frames) out.push_back({f[idx(kp)].x, -f[idx(kp)].y});
  return out;
}

std::vector<double> KeypointSeries::confidence(Body25 kp) const {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f[idx(kp)].confidence);
  return out;
}

}  // namespace mmc
