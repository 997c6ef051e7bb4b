// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "mmc/keypoints.hpp"
#include "mmc/mocap_io.hpp"

namespace mmc {

enum class SynthKind { cmj, dropjump, rjt, press, rotation, curl };

std::string_view to_string(SynthKind k);
SynthKind synth_kind_from_string(std::string_view s);

struct SynthParams {
  SynthKind kind{SynthKind::cmj};
  double fps{30.0};
  double duration_s{0.0};  // 0: as long as the programmed repetitions need
  int reps{3};

  // Jumps.
  double flight_s{0.5};
  double contact_s{0.25};
  double platform_m{0.22};

  // Press.
  double amplitude_m{0.6};
  double concentric_s{1.0};
  bool squat{false};  // start at the top, descend, then drive up

  // Rotation / curl.
  double rom_deg{45.0};
  double sweep_s{1.0};
  bool internal_rotation{true};

  // Per-repetition relative jitter applied to the programmed metric.
  double rep_jitter{0.0};

  // Rendering.
  double ptm_true{0.002};  // metres per pixel
  double noise_sigma_px{0.0};
  double stature_m{1.75};
  double shoulder_to_toe_fraction{0.75};
  Side dominant_side{Side::right};
  std::uint64_t seed{1};

  // Reference streams.
  double omc_fps{100.0};
  double omc_noise_mm{0.0};
  double forceplate_fps{1000.0};
  double forceplate_noise_n{0.0};
  double body_mass_kg{75.0};

  // Exchange the left and right ankle channels over this frame range and
  // drop their confidence to `swap_confidence`.
  std::optional<FrameRange> swap_frames;
  double swap_confidence{0.3};
};

// Exact programmed values for one repetition.
struct RepTruth {
  double height_m{0.0};
  double flight_s{0.0};
  double contact_s{0.0};
  double peak_mps{0.0};
  double mean_mps{0.0};
  double rom_deg{0.0};
  double mean_ang_vel_dps{0.0};
  double event_time_s{0.0};  // apex / lockout / end-range time
};

struct GroundTruth {
  std::vector<RepTruth> reps;
  // Repeated-jump test: contact k is followed by flight k.
  std::vector<double> hop_flights_s;
  std::vector<double> hop_contacts_s;
  double ptm_true{0.0};
};

struct SynthOutput {
  KeypointSeries mmc;
  MarkerSeries omc;
  ForcePlateRecord forceplate;
  GroundTruth truth;
  std::vector<ManualSegment> manual_segments;  // drop jumps
  // Noise-free vertical COM (mid-hip) displacement in metres at the MMC rate.
  std::vector<double> com_m;
};

// Ballistic flight: h = g t_f^2 / 8.
double ballistic_height(double flight_s);

SynthOutput gen_jump(const SynthParams& params);
SynthOutput gen_press(const SynthParams& params);
SynthOutput gen_rotation(const SynthParams& params);
SynthOutput generate(const SynthParams& params);

// Standard normal variates. std::mt19937_64 is fully specified by the
// standard but the <random> distributions are not, so the uniform mapping and
// the Box-Muller transform are fixed here to keep fixtures identical across
// standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}
  double operator()();
  double uniform();  // [0, 1)

 private:
  std::mt19937_64 engine_;
  double spare_{0.0};
  bool has_spare_{false};
};

struct FixtureOptions {
  std::string participant_id{"P01"};
  TaskCode task{TaskCode::CMJBL};
  std::optional<double> height_m;      // written to the manifest
  bool write_omc{true};
  bool write_forceplate{true};
};

// Writes an OpenPose directory, OMC CSV, force-plate CSV and a manifest under
// `dir`; returns the manifest path.
std::filesystem::path write_fixture(const SynthOutput& output, const SynthParams& params,
                                    const FixtureOptions& options,
                                    const std::filesystem::path& dir);

// Synthetic agreement study: `participants` x `reps` for CMJBL, OHP, RJT and
// HIR. Returns the manifest paths.
std::vector<std::filesystem::path> write_mini_study(const std::filesystem::path& dir,
                                                    int participants = 4, int reps = 3,
                                                    std::uint64_t seed = 2024);

SynthKind synth_kind_for_task(TaskCode task);

}  // namespace mmc
