// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "mmc/signal.hpp"

namespace mmc {

// OpenPose BODY_25 ordering.
enum class Body25 : std::size_t {
  Nose = 0,
  Neck = 1,
  RShoulder = 2,
  RElbow = 3,
  RWrist = 4,
  LShoulder = 5,
  LElbow = 6,
  LWrist = 7,
  MidHip = 8,
  RHip = 9,
  RKnee = 10,
  RAnkle = 11,
  LHip = 12,
  LKnee = 13,
  LAnkle = 14,
  REye = 15,
  LEye = 16,
  REar = 17,
  LEar = 18,
  LBigToe = 19,
  LSmallToe = 20,
  LHeel = 21,
  RBigToe = 22,
  RSmallToe = 23,
  RHeel = 24,
};

inline constexpr std::size_t kBody25Count = 25;

std::string_view body25_name(Body25 kp);
std::optional<Body25> body25_from_name(std::string_view name);

constexpr std::size_t idx(Body25 kp) { return static_cast<std::size_t>(kp); }

enum class Side { left, right };

std::string_view to_string(Side s);
Side side_from_string(std::string_view s);

// Side-specific keypoints.
Body25 ankle_of(Side s);
Body25 knee_of(Side s);
Body25 hip_of(Side s);
Body25 big_toe_of(Side s);
Body25 wrist_of(Side s);
Body25 shoulder_of(Side s);

// Pixel coordinates plus detector confidence in [0, 1].
struct Keypoint {
  double x{0.0};
  double y{0.0};
  double confidence{0.0};

  bool operator==(const Keypoint&) const = default;
};

using Frame = std::array<Keypoint, kBody25Count>;

// Per-frame BODY_25 skeleton stream from a single camera.
struct KeypointSeries {
  std::vector<Frame> frames;
  double fps{30.0};
  // Cleared by mask_low_confidence for keypoints that never reach the
  // confidence threshold.
  std::array<bool, kBody25Count> usable = make_all_usable();

  std::size_t size() const { return frames.size(); }
  double duration_s() const { return static_cast<double>(frames.size()) / fps; }

  // Throws QualityError when the keypoint was marked unusable.
  void require_usable(Body25 kp) const;

  // Image y grows downward; vertical_px returns height above the image
  // origin (-y) so that "up" is positive.
  Signal vertical_px(Body25 kp) const;
  Signal horizontal_px(Body25 kp) const;
  std::vector<Vec2> trajectory(Body25 kp) const;
  std::vector<double> confidence(Body25 kp) const;

 private:
  static constexpr std::array<bool, kBody25Count> make_all_usable() {
    std::array<bool, kBody25Count> a{};
    for (auto& b : a) b = true;
    return a;
  }
};

}  // namespace mmc
