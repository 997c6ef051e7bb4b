// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/mocap_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "mmc/errors.hpp"
#include "mmc/text_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mmc {

// ---------------------------------------------------------------------------
// Enumerations

namespace {

struct TaskInfo {
  TaskCode code;
  std::string_view name;
  Device truth;
  CameraView view;
};

constexpr std::array<TaskInfo, 12> kTasks = {{
    {TaskCode::BSQ, "BSQ", Device::omc, CameraView::front},
    {TaskCode::OHP, "OHP", Device::omc, CameraView::front},
    {TaskCode::CMJBL, "CMJBL", Device::forceplate, CameraView::front},
    {TaskCode::CMJUL, "CMJUL", Device::forceplate, CameraView::front},
    {TaskCode::DJBL, "DJBL", Device::forceplate, CameraView::front},
    {TaskCode::DJUL, "DJUL", Device::forceplate, CameraView::front},
    {TaskCode::RJT, "RJT", Device::forceplate, CameraView::front},
    {TaskCode::NDC, "NDC", Device::omc, CameraView::right},
    {TaskCode::SLS, "SLS", Device::omc, CameraView::right},
    {TaskCode::HER, "HER", Device::omc, CameraView::front},
    {TaskCode::HIR, "HIR", Device::omc, CameraView::front},
    {TaskCode::SLR, "SLR", Device::omc, CameraView::right},
}};

const TaskInfo& info(TaskCode t) {
  for (const auto& ti : kTasks) {
    if (ti.code == t) return ti;
  }
  throw ValidationError("unknown task");
}

}  // namespace

std::string_view to_string(TaskCode t) { return info(t).name; }

TaskCode task_from_string(std::string_view s) {
  for (const auto& ti : kTasks) {
    if (ti.name == s) return ti.code;
  }
  throw ValidationError(fmt::format("unknown task_code '{}'", s));
}

const std::vector<TaskCode>& all_tasks() {
  static const std::vector<TaskCode> tasks = [] {
    std::vector<TaskCode> v;
    for (const auto& ti : kTasks) v.push_back(ti.code);
    return v;
  }();
  return tasks;
}

std::string_view to_string(Device d) {
  switch (d) {
    case Device::mmc: return "mmc";
    case Device::omc: return "omc";
    case Device::forceplate: return "forceplate";
  }
  return "?";
}

Device device_from_string(std::string_view s) {
  if (s == "mmc") return Device::mmc;
  if (s == "omc") return Device::omc;
  if (s == "forceplate") return Device::forceplate;
  throw ValidationError(fmt::format("unknown device '{}'", s));
}

Device ground_truth_device(TaskCode t) { return info(t).truth; }

std::string_view to_string(CameraView v) {
  switch (v) {
    case CameraView::front: return "front";
    case CameraView::rear: return "rear";
    case CameraView::left: return "left";
    case CameraView::right: return "right";
  }
  return "?";
}

CameraView view_from_string(std::string_view s) {
  if (s == "front") return CameraView::front;
  if (s == "rear") return CameraView::rear;
  if (s == "left") return CameraView::left;
  if (s == "right") return CameraView::right;
  throw ValidationError(fmt::format("invalid camera_view '{}'", s));
}

// ---------------------------------------------------------------------------
// OpenPose

namespace {

std::optional<std::uint64_t> trailing_index(const std::string& stem) {
  auto end = stem.find_last_of("0123456789");
  if (end == std::string::npos) return std::nullopt;
  auto begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  const auto digits = stem.substr(begin, end - begin + 1);
  if (digits.size() > 18) return std::nullopt;
  return std::stoull(digits);
}

Frame dropout_frame() { return Frame{}; }

// Returns nullopt and appends a diagnostic when the array is unusable.
std::optional<Frame> person_from_json(const json& person, const std::string& where,
                                      std::vector<std::string>& diag) {
  const auto it = person.find("pose_keypoints_2d");
  if (it == person.end() || !it->is_array()) {
    diag.push_back(fmt::format("{}: person without pose_keypoints_2d", where));
    return std::nullopt;
  }
  if (it->size() != 3 * kBody25Count) {
    diag.push_back(fmt::format("{}: pose_keypoints_2d has {} values, expected 75", where, it->size()));
    return std::nullopt;
  }
  Frame f{};
  for (std::size_t k = 0; k < kBody25Count; ++k) {
    const auto& jx = (*it)[3 * k];
    const auto& jy = (*it)[3 * k + 1];
    const auto& jc = (*it)[3 * k + 2];
    if (!jx.is_number() || !jy.is_number() || !jc.is_number()) {
      diag.push_back(fmt::format("{}: non-numeric keypoint value", where));
      return std::nullopt;
    }
    Keypoint kp{jx.get<double>(), jy.get<double>(), jc.get<double>()};
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || !(kp.confidence >= 0.0 && kp.confidence <= 1.0)) {
      diag.push_back(fmt::format("{}: keypoint {} out of range", where, k));
      return std::nullopt;
    }
    f[k] = kp;
  }
  return f;
}

}  // namespace

std::optional<std::size_t> select_person(const std::vector<Frame>& people) {
  std::optional<std::size_t> best;
  double best_mean = -1.0;
  for (std::size_t p = 0; p < people.size(); ++p) {
    double sum = 0.0;
    for (const auto& kp : people[p]) sum += kp.confidence;
    const double mean = sum / static_cast<double>(kBody25Count);
    if (mean > best_mean) {
      best_mean = mean;
      best = p;
    }
  }
  return best;
}

OpenPoseParseResult parse_openpose_dir(const fs::path& dir, double fps) {
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  if (!fs::is_directory(dir)) {
    throw ParseError(fmt::format("missing OpenPose directory {}", dir.string()));
  }

  struct Entry {
    std::uint64_t index;
    std::string name;
    fs::path path;
  };
  std::vector<Entry> files;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (!de.is_regular_file() || de.path().extension() != ".json") continue;
    const auto stem = de.path().stem().string();
    files.push_back({trailing_index(stem).value_or(std::numeric_limits<std::uint64_t>::max()),
                     de.path().filename().string(), de.path()});
  }
  std::sort(files.begin(), files.end(), [](const Entry& a, const Entry& b) {
    return a.index != b.index ? a.index < b.index : a.name < b.name;
  });

  OpenPoseParseResult result;
  result.series.fps = fps;
  result.series.frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& e = files[i];
    json doc;
    try {
      doc = json::parse(text::read_file(e.path));
    } catch (const std::exception& ex) {
      result.diagnostics.push_back(fmt::format("{}: malformed JSON ({}); frame kept as dropout", e.name, ex.what()));
      result.series.frames.push_back(dropout_frame());
      continue;
    }
    const auto people_it = doc.is_object() ? doc.find("people") : doc.end();
    if (people_it == doc.end() || !people_it->is_array()) {
      result.diagnostics.push_back(fmt::format("{}: no 'people' array; frame kept as dropout", e.name));
      result.series.frames.push_back(dropout_frame());
      continue;
    }
    std::vector<Frame> people;
    for (std::size_t p = 0; p < people_it->size(); ++p) {
      if (auto f = person_from_json((*people_it)[p], fmt::format("{} person {}", e.name, p), result.diagnostics)) {
        people.push_back(*f);
      }
    }
    if (auto sel = select_person(people)) {
      result.series.frames.push_back(people[*sel]);
    } else {
      if (!people_it->empty()) {
        result.diagnostics.push_back(fmt::format("{}: no valid person; frame kept as dropout", e.name));
      }
      result.series.frames.push_back(dropout_frame());
    }
  }
  return result;
}

void write_openpose_dir(const KeypointSeries& series, const fs::path& dir, std::string_view stem) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < series.frames.size(); ++i) {
    json arr = json::array();
    for (const auto& kp : series.frames[i]) {
      arr.push_back(kp.x);
      arr.push_back(kp.y);
      arr.push_back(kp.confidence);
    }
    json doc = {{"version", 1.3},
                {"people", json::array({json{{"person_id", json::array({-1})}, {"pose_keypoints_2d", arr}}})}};
    text::write_file_atomic(dir / fmt::format("{}_{:012d}_keypoints.json", stem, i), doc.dump());
  }
}

// ---------------------------------------------------------------------------
// OMC CSV

std::size_t MarkerSeries::size() const {
  return markers.empty() ? 0 : markers.begin()->second.size();
}

bool MarkerSeries::has(std::string_view name) const { return markers.find(std::string(name)) != markers.end(); }

const std::vector<Vec3>& MarkerSeries::at(std::string_view name) const {
  const auto it = markers.find(std::string(name));
  if (it == markers.end()) throw QualityError(fmt::format("marker '{}' not present", name));
  return it->second;
}

bool fill_gaps(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isnan(v[i])) {
      first = i;
      break;
    }
  }
  if (first == n) return false;
  for (std::size_t i = 0; i < first; ++i) v[i] = v[first];
  std::size_t prev = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (std::isnan(v[i])) continue;
    if (i > prev + 1) {
      const double a = v[prev];
      const double b = v[i];
      const double span = static_cast<double>(i - prev);
      for (std::size_t j = prev + 1; j < i; ++j) {
        const double t = static_cast<double>(j - prev) / span;
        v[j] = a + (b - a) * t;
      }
    }
    prev = i;
  }
  for (std::size_t i = prev + 1; i < n; ++i) v[i] = v[prev];
  return true;
}

namespace {

// Parses "# fps=<n>" (whitespace tolerant). Returns nullopt for other comments.
std::optional<double> fps_comment(std::string_view line) {
  auto body = text::trim(line.substr(1));
  if (body.size() < 4) return std::nullopt;
  std::string lower(body.substr(0, 3));
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower != "fps") return std::nullopt;
  body = text::trim(body.substr(3));
  if (body.empty() || body.front() != '=') return std::nullopt;
  const auto v = text::parse_double(body.substr(1));
  if (!v) throw ParseError(fmt::format("invalid fps header '{}'", line));
  return *v;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    out.push_back(text.substr(start, pos - start));
    if (pos == text.size()) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

MarkerSeries parse_omc_csv_text(std::string_view text, double fps) {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
  std::size_t line_no = 0;
  for (auto raw : lines_of(text)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (auto f = fps_comment(line)) fps = *f;
      continue;
    }
    auto cells = text::split(line);
    if (header.empty()) {
      header = std::move(cells);
      columns.assign(header.size(), {});
      continue;
    }
    if (cells.size() != header.size()) {
      throw ValidationError(fmt::format("line {}: {} cells but header has {} columns (unequal column lengths)",
                                        line_no, cells.size(), header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty()) {
        columns[c].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const auto v = text::parse_double(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(fmt::format("line {}, column {} ({}): non-numeric cell '{}'", line_no, c + 1, header[c],
                                     cells[c]));
      }
      columns[c].push_back(*v);
    }
  }
  if (header.empty()) throw ParseError("OMC CSV has no header");
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");

  struct Axes {
    std::optional<std::size_t> x, y, z;
  };
  std::map<std::string, Axes> layout;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto dot = header[c].rfind('.');
    if (dot == std::string::npos) continue;  // frame / time columns
    const auto name = header[c].substr(0, dot);
    const auto axis = header[c].substr(dot + 1);
    auto& a = layout[name];
    std::optional<std::size_t>* slot = axis == "x" ? &a.x : axis == "y" ? &a.y : axis == "z" ? &a.z : nullptr;
    if (slot == nullptr) throw ParseError(fmt::format("column '{}': axis must be x, y or z", header[c]));
    if (slot->has_value()) throw ValidationError(fmt::format("duplicate column '{}'", header[c]));
    *slot = c;
  }
  if (layout.empty()) throw ValidationError("OMC CSV has no marker.axis columns");

  MarkerSeries out;
  out.fps = fps;
  const std::size_t rows = columns.front().size();
  for (auto& [name, a] : layout) {
    if (!a.x || !a.y || !a.z) throw ValidationError(fmt::format("marker '{}' lacks one of x/y/z", name));
    for (auto c : {*a.x, *a.y, *a.z}) {
      if (!fill_gaps(columns[c])) {
        throw ValidationError(fmt::format("column '{}' has no observed samples", header[c]));
      }
    }
    std::vector<Vec3> traj(rows);
    for (std::size_t r = 0; r < rows; ++r) traj[r] = {columns[*a.x][r], columns[*a.y][r], columns[*a.z][r]};
    out.markers.emplace(name, std::move(traj));
  }
  return out;
}

MarkerSeries parse_omc_csv(const fs::path& path, double fps) {
  return parse_omc_csv_text(text::read_file(path), fps);
}

void write_omc_csv(const MarkerSeries& series, const fs::path& path) {
  std::string out = fmt::format("# fps={}\n", text::format_double(series.fps));
  bool first = true;
  for (const auto& [name, traj] : series.markers) {
    (void)traj;
    for (const char* ax : {"x", "y", "z"}) {
      if (!first) out += ',';
      out += name + "." + ax;
      first = false;
    }
  }
  out += '\n';
  for (std::size_t r = 0; r < series.size(); ++r) {
    first = true;
    for (const auto& [name, traj] : series.markers) {
      for (double v : {traj[r].x, traj[r].y, traj[r].z}) {
        if (!first) out += ',';
        out += text::format_double(v);
        first = false;
      }
    }
    out += '\n';
  }
  text::write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Force plate

ForcePlateRecord parse_forceplate_csv_text(std::string_view text) {
  ForcePlateRecord rec;
  std::optional<double> fps;
  std::size_t line_no = 0;
  for (auto raw : lines_of(text)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (auto f = fps_comment(line)) fps = *f;
      continue;
    }
    const auto cells = text::split(line);
    if (cells.size() != 1) {
      throw ParseError(fmt::format("line {}: expected a single column, found {}", line_no, cells.size()));
    }
    const auto v = text::parse_double(cells[0]);
    if (!v || !std::isfinite(*v)) {
      throw ParseError(fmt::format("line {}: non-numeric value '{}'", line_no, cells[0]));
    }
    rec.vertical_force.push_back(*v);
  }
  if (!fps) throw ParseError("missing fps header");
  if (!(*fps > 0.0)) throw ValidationError(fmt::format("fps must be positive, got {}", *fps));
  rec.fps = *fps;
  return rec;
}

ForcePlateRecord parse_forceplate_csv(const fs::path& path) {
  return parse_forceplate_csv_text(text::read_file(path));
}

void write_forceplate_csv(const ForcePlateRecord& record, const fs::path& path) {
  std::string out = fmt::format("# fps={}\n", text::format_double(record.fps));
  for (double v : record.vertical_force) {
    out += text::format_double(v);
    out += '\n';
  }
  text::write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

double number_field(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ValidationError(fmt::format("manifest key '{}' must be a number", key));
  return v.get<double>();
}

std::string string_field(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ValidationError(fmt::format("manifest key '{}' must be a string", key));
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

SessionManifest parse_manifest_text(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const std::exception& ex) {
    throw ParseError(fmt::format("manifest is not valid JSON: {}", ex.what()));
  }
  if (!doc.is_object()) throw ParseError("manifest must be a JSON object");

  static const std::set<std::string> known = {
      "participant_id", "task_code", "height_m", "dominant_side", "camera_view", "mmc_dir",
      "omc_csv", "forceplate_csv", "mmc_fps", "omc_fps", "object_len_px", "object_len_m",
      "t1_s", "t2_s", "expected_reps", "min_peak_separation_s", "min_prominence_frac", "segments"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!known.contains(key)) throw ValidationError(fmt::format("unknown manifest key '{}'", key));
  }

  SessionManifest m;
  if (!doc.contains("participant_id")) throw ValidationError("manifest lacks participant_id");
  if (!doc.contains("task_code")) throw ValidationError("manifest lacks task_code");
  m.participant_id = string_field(doc, "participant_id");
  m.task = task_from_string(string_field(doc, "task_code"));
  m.camera_view = info(m.task).view;

  if (doc.contains("height_m")) {
    m.height_m = number_field(doc, "height_m");
    if (!(*m.height_m > 0.0)) throw ValidationError("height_m must be positive");
  }
  if (doc.contains("dominant_side")) m.dominant_side = side_from_string(string_field(doc, "dominant_side"));
  if (doc.contains("camera_view")) m.camera_view = view_from_string(string_field(doc, "camera_view"));
  if (doc.contains("mmc_dir")) m.mmc_dir = resolve(base_dir, string_field(doc, "mmc_dir"));
  if (doc.contains("omc_csv")) m.omc_csv = resolve(base_dir, string_field(doc, "omc_csv"));
  if (doc.contains("forceplate_csv")) m.forceplate_csv = resolve(base_dir, string_field(doc, "forceplate_csv"));
  if (doc.contains("mmc_fps")) m.mmc_fps = number_field(doc, "mmc_fps");
  if (doc.contains("omc_fps")) m.omc_fps = number_field(doc, "omc_fps");
  if (!(m.mmc_fps > 0.0) || !(m.omc_fps > 0.0)) throw ValidationError("fps must be positive");
  if (doc.contains("object_len_px")) {
    m.object_len_px = number_field(doc, "object_len_px");
    if (!(*m.object_len_px > 0.0)) throw ValidationError("object_len_px must be positive");
  }
  if (doc.contains("object_len_m")) m.object_len_m = number_field(doc, "object_len_m");
  if (doc.contains("t1_s")) m.t1_s = number_field(doc, "t1_s");
  if (doc.contains("t2_s")) m.t2_s = number_field(doc, "t2_s");
  if (doc.contains("expected_reps")) m.expected_reps = static_cast<int>(number_field(doc, "expected_reps"));
  if (doc.contains("min_peak_separation_s")) m.min_peak_separation_s = number_field(doc, "min_peak_separation_s");
  if (doc.contains("min_prominence_frac")) m.min_prominence_frac = number_field(doc, "min_prominence_frac");
  if (doc.contains("segments")) {
    const auto& segs = doc.at("segments");
    if (!segs.is_array()) throw ValidationError("segments must be an array");
    for (const auto& s : segs) {
      ManualSegment ms;
      if (s.is_array() && s.size() == 2 && s[0].is_number() && s[1].is_number()) {
        ms = {s[0].get<double>(), s[1].get<double>()};
      } else if (s.is_object() && s.contains("start_s") && s.contains("end_s")) {
        ms = {s.at("start_s").get<double>(), s.at("end_s").get<double>()};
      } else {
        throw ValidationError("segments entries must be [start_s, end_s]");
      }
      if (!(ms.start_s >= 0.0 && ms.end_s > ms.start_s)) {
        throw ValidationError(fmt::format("invalid segment [{}, {}]", ms.start_s, ms.end_s));
      }
      m.segments.push_back(ms);
    }
  }
  return m;
}

SessionManifest parse_manifest(const fs::path& path) {
  return parse_manifest_text(text::read_file(path), path.parent_path());
}

void write_manifest(const SessionManifest& m, const fs::path& path) {
  const auto base = path.parent_path();
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  json doc;
  doc["participant_id"] = m.participant_id;
  doc["task_code"] = std::string(to_string(m.task));
  if (m.height_m) doc["height_m"] = *m.height_m;
  doc["dominant_side"] = std::string(to_string(m.dominant_side));
  doc["camera_view"] = std::string(to_string(m.camera_view));
  if (m.mmc_dir) doc["mmc_dir"] = rel(*m.mmc_dir);
  if (m.omc_csv) doc["omc_csv"] = rel(*m.omc_csv);
  if (m.forceplate_csv) doc["forceplate_csv"] = rel(*m.forceplate_csv);
  doc["mmc_fps"] = m.mmc_fps;
  doc["omc_fps"] = m.omc_fps;
  if (m.object_len_px) doc["object_len_px"] = *m.object_len_px;
  doc["object_len_m"] = m.object_len_m;
  if (m.t1_s) doc["t1_s"] = *m.t1_s;
  if (m.t2_s) doc["t2_s"] = *m.t2_s;
  if (m.expected_reps) doc["expected_reps"] = *m.expected_reps;
  if (m.min_peak_separation_s) doc["min_peak_separation_s"] = *m.min_peak_separation_s;
  if (m.min_prominence_frac) doc["min_prominence_frac"] = *m.min_prominence_frac;
  if (!m.segments.empty()) {
    json segs = json::array();
    for (const auto& s : m.segments) segs.push_back(json::array({s.start_s, s.end_s}));
    doc["segments"] = segs;
  }
  text::write_file_atomic(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Session

Session load_session(const SessionManifest& manifest) {
  Session s;
  s.manifest = manifest;
  const auto truth = ground_truth_device(manifest.task);
  if (!manifest.mmc_dir) {
    throw ValidationError(fmt::format("task {} requires an MMC stream (mmc_dir)", to_string(manifest.task)));
  }
  if (truth == Device::omc && !manifest.omc_csv) {
    throw ValidationError(
        fmt::format("task {} requires an OMC stream (ground truth) but omc_csv is missing", to_string(manifest.task)));
  }
  if (truth == Device::forceplate && !manifest.forceplate_csv) {
    throw ValidationError(fmt::format("task {} requires a force-plate stream (ground truth) but forceplate_csv is missing",
                                      to_string(manifest.task)));
  }

  auto op = parse_openpose_dir(*manifest.mmc_dir, manifest.mmc_fps);
  s.mmc = std::move(op.series);
  for (auto& d : op.diagnostics) s.diagnostics.push_back("mmc: " + d);
  if (manifest.omc_csv) s.omc = parse_omc_csv(*manifest.omc_csv, manifest.omc_fps);
  if (manifest.forceplate_csv) s.forceplate = parse_forceplate_csv(*manifest.forceplate_csv);
  return s;
}

Session load_session(const fs::path& manifest_path) { return load_session(parse_manifest(manifest_path)); }

}  // namespace mmc
