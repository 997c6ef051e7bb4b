// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmc/agreement.hpp"
#include "mmc/mocap_io.hpp"
#include "mmc/pipeline.hpp"

namespace mmc {

// One Table-II style row: agreement of MMC with the reference device for a
// (metric, task, ptm method) triple.
struct ReportRow {
  std::string metric;
  std::string unit;
  Device ground_truth{Device::forceplate};
  TaskCode task{TaskCode::CMJBL};
  std::string ptm_method;
  AgreementReport agreement;
  std::vector<MeasurementPair> pairs;
};

struct CompareResult {
  std::vector<ReportRow> rows;
  std::vector<std::string> diagnostics;
  std::size_t unmatched{0};
};

// Pairs MMC records with reference records by (participant, task, rep,
// metric). Throws ValidationError("need two devices") when the input holds a
// single device.
CompareResult cmd_compare(const std::vector<MetricRecord>& records);

void write_agreement_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
void write_pairs_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
// Rebuilds rows (with their pairs) from the two files above.
std::vector<ReportRow> read_compare_output(const std::filesystem::path& agreement_csv,
                                           const std::filesystem::path& pairs_csv);

std::string format_table(const std::vector<ReportRow>& rows);

struct ReportFiles {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

// Writes table.txt and, per format, table.csv plus a Bland-Altman scatter
// (CSV and/or SVG) per row.
ReportFiles cmd_report(const std::vector<ReportRow>& rows, const std::vector<std::string>& formats,
                       const std::filesystem::path& out_dir);

std::string scatter_basename(const ReportRow& row);
std::string bland_altman_svg(const ReportRow& row);

}  // namespace mmc
