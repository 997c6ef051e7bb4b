// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmc/calibration.hpp"
#include "mmc/mocap_io.hpp"
#include "mmc/preprocess.hpp"

namespace mmc {

// One measured value for one repetition on one device.
struct MetricRecord {
  std::string participant_id;
  TaskCode task{TaskCode::CMJBL};
  int rep_index{0};
  Device device{Device::mmc};
  std::string ptm_method;  // gravity | height | object | n/a
  std::string metric;
  double value{0.0};
  std::string unit;
};

// A repetition that produced no metric row, with the reason.
struct Discard {
  std::string participant_id;
  TaskCode task{TaskCode::CMJBL};
  int rep_index{-1};  // -1 when the whole session was skipped
  Device device{Device::mmc};
  std::string reason;
};

struct RunConfig {
  std::vector<std::filesystem::path> manifests;
  std::vector<PtmMethod> ptm_methods;  // empty: every method valid for the task
  std::filesystem::path out_dir{"out"};
  std::vector<std::string> formats{"csv", "json"};

  std::optional<std::size_t> savgol_window_mmc;
  std::optional<std::size_t> savgol_window_omc;
  int savgol_order{2};
  double confidence_threshold{0.3};
  double swap_drop_fraction{0.2};

  std::optional<double> t1_s;
  std::optional<double> t2_s;
  std::optional<int> expected_reps;
  std::optional<double> min_peak_separation_s;
  std::optional<double> min_prominence_frac;

  std::size_t threads{0};  // 0: hardware concurrency
};

// Flat JSON document; unknown keys are rejected.
RunConfig parse_run_config(const std::filesystem::path& path);
RunConfig parse_run_config_text(std::string_view text);

struct SessionResult {
  std::string participant_id;
  TaskCode task{TaskCode::CMJBL};
  bool ok{true};
  std::vector<MetricRecord> records;
  std::vector<Discard> discards;
  std::vector<std::string> diagnostics;
};

// PTM methods that apply to a task (jumps: gravity, height; barbell tasks:
// height, object; others: none).
std::vector<PtmMethod> valid_ptm_methods(TaskCode task);

// Segmentation defaults tuned per task.
SegmentationConfig default_segmentation(TaskCode task);

SessionResult analyze_session(const Session& session, const RunConfig& config);

struct AnalyzeResult {
  std::vector<SessionResult> sessions;
  std::size_t failed_sessions{0};

  std::vector<MetricRecord> records() const;
  std::vector<Discard> discards() const;
};

// Loads and analyzes every manifest (concurrently), writes per-task outputs
// under config.out_dir and returns the collected results.
AnalyzeResult cmd_analyze(const RunConfig& config);

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path);
void write_metrics_json(const std::vector<MetricRecord>& records, const std::filesystem::path& path);
std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace mmc
