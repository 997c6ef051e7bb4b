// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmc/keypoints.hpp"
#include "mmc/signal.hpp"

namespace mmc {

// Marker trajectories from the optical system, millimetres.
struct MarkerSeries {
  std::map<std::string, std::vector<Vec3>> markers;
  double fps{100.0};

  std::size_t size() const;
  double duration_s() const { return static_cast<double>(size()) / fps; }
  bool has(std::string_view name) const;
  const std::vector<Vec3>& at(std::string_view name) const;
};

struct ForcePlateRecord {
  std::vector<double> vertical_force;  // newtons
  double fps{1000.0};

  double duration_s() const {
    return static_cast<double>(vertical_force.size()) / fps;
  }
};

enum class TaskCode { BSQ, OHP, CMJBL, CMJUL, DJBL, DJUL, RJT, NDC, SLS, HER, HIR, SLR };

std::string_view to_string(TaskCode t);
TaskCode task_from_string(std::string_view s);  // throws ValidationError
const std::vector<TaskCode>& all_tasks();

enum class Device { mmc, omc, forceplate };

std::string_view to_string(Device d);
Device device_from_string(std::string_view s);

// Which device provides the reference measurement for a task.
Device ground_truth_device(TaskCode t);

enum class CameraView { front, rear, left, right };

std::string_view to_string(CameraView v);
CameraView view_from_string(std::string_view s);

// Manual repetition window, seconds from recording start.
struct ManualSegment {
  double start_s{0.0};
  double end_s{0.0};
};

struct SessionManifest {
  std::string participant_id;
  TaskCode task{TaskCode::CMJBL};
  std::optional<double> height_m;
  Side dominant_side{Side::right};
  CameraView camera_view{CameraView::front};

  std::optional<std::filesystem::path> mmc_dir;
  std::optional<std::filesystem::path> omc_csv;
  std::optional<std::filesystem::path> forceplate_csv;

  double mmc_fps{30.0};
  double omc_fps{100.0};

  std::optional<double> object_len_px;
  double object_len_m{1.125};

  // Segmentation overrides; unset keys fall back to task defaults.
  std::optional<double> t1_s;
  std::optional<double> t2_s;
  std::optional<int> expected_reps;
  std::optional<double> min_peak_separation_s;
  std::optional<double> min_prominence_frac;
  std::vector<ManualSegment> segments;
};

struct Session {
  SessionManifest manifest;
  std::optional<KeypointSeries> mmc;
  std::optional<MarkerSeries> omc;
  std::optional<ForcePlateRecord> forceplate;
  std::vector<std::string> diagnostics;
};

struct OpenPoseParseResult {
  KeypointSeries series;
  std::vector<std::string> diagnostics;
};

// Reads an OpenPose per-frame JSON directory. Frames are ordered by the last
// run of digits in each file name. Frames that cannot be read are kept as
// zero-confidence dropouts so the timeline stays intact.
OpenPoseParseResult parse_openpose_dir(const std::filesystem::path& dir, double fps = 30.0);

// Writes one `<stem>_<index>_keypoints.json` file per frame, each carrying a
// single person. Parsing the result reproduces the series exactly.
void write_openpose_dir(const KeypointSeries& series, const std::filesystem::path& dir,
                        std::string_view stem = "frame");

// Selects the person with the largest mean confidence; ties go to the lower
// index. Returns nullopt for an empty list.
std::optional<std::size_t> select_person(const std::vector<Frame>& people);

MarkerSeries parse_omc_csv(const std::filesystem::path& path, double fps = 100.0);
MarkerSeries parse_omc_csv_text(std::string_view text, double fps = 100.0);
void write_omc_csv(const MarkerSeries& series, const std::filesystem::path& path);

// Fills NaN gaps in place: interior gaps linearly, leading and trailing gaps
// with the nearest observed value. Returns false when every value is NaN.
bool fill_gaps(std::vector<double>& values);

ForcePlateRecord parse_forceplate_csv(const std::filesystem::path& path);
ForcePlateRecord parse_forceplate_csv_text(std::string_view text);
void write_forceplate_csv(const ForcePlateRecord& record, const std::filesystem::path& path);

// Relative file paths resolve against the manifest's directory.
SessionManifest parse_manifest(const std::filesystem::path& path);
SessionManifest parse_manifest_text(std::string_view text,
                                    const std::filesystem::path& base_dir = {});
void write_manifest(const SessionManifest& manifest, const std::filesystem::path& path);

Session load_session(const std::filesystem::path& manifest_path);
Session load_session(const SessionManifest& manifest);

}  // namespace mmc
