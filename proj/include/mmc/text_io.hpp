// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmc::text {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view line, char delim = ',');

// Whole-string numeric parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view s);

// Shortest round-trip representation.
std::string format_double(double v);
// Fixed decimals; NaN prints as "n/a".
std::string format_fixed(double v, int decimals);

}  // namespace mmc::text
