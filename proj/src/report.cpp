// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "mmc/errors.hpp"
#include "mmc/text_io.hpp"

namespace fs = std::filesystem;

namespace mmc {

namespace {

const std::vector<std::string> kMetricOrder = {"jump_height",  "peak_velocity", "mean_velocity", "flight_time",
                                               "contact_time", "rom",           "angular_velocity"};
const std::vector<std::string> kPtmOrder = {"gravity", "height", "object", "n/a"};

std::size_t rank(const std::vector<std::string>& order, const std::string& v) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), v) - order.begin());
}

std::string metric_title(const std::string& metric) {
  if (metric == "jump_height") return "Jump height";
  if (metric == "peak_velocity") return "Peak velocity";
  if (metric == "mean_velocity") return "Mean velocity";
  if (metric == "flight_time") return "Flight time";
  if (metric == "contact_time") return "Contact time";
  if (metric == "rom") return "ROM";
  if (metric == "angular_velocity") return "Angular velocity";
  return metric;
}

std::string device_title(Device d) {
  switch (d) {
    case Device::forceplate: return "Force plate";
    case Device::omc: return "OMC";
    case Device::mmc: return "MMC";
  }
  return "";
}

int decimals_for(const std::string& unit) {
  if (unit == "m/s" || unit == "s") return 3;
  return 2;
}

std::string num(double v) { return std::isnan(v) ? std::string("n/a") : text::format_double(v); }

double parse_num(const std::string& s) {
  if (s == "n/a") return std::numeric_limits<double>::quiet_NaN();
  const auto v = text::parse_double(s);
  if (!v) throw ParseError(fmt::format("non-numeric value '{}'", s));
  return *v;
}

using RowKey = std::tuple<std::size_t, TaskCode, std::size_t>;  // metric rank, task, ptm rank

}  // namespace

CompareResult cmd_compare(const std::vector<MetricRecord>& records) {
  std::set<Device> devices;
  for (const auto& r : records) devices.insert(r.device);
  if (devices.size() < 2) throw ValidationError("need two devices");

  using TruthKey = std::tuple<std::string, TaskCode, int, std::string>;
  std::map<TruthKey, const MetricRecord*> truth;
  for (const auto& r : records) {
    if (r.device != Device::mmc) truth[{r.participant_id, r.task, r.rep_index, r.metric}] = &r;
  }

  struct Acc {
    ReportRow row;
    std::set<TruthKey> matched;
    std::size_t unmatched_mmc{0};
  };
  std::map<RowKey, Acc> acc;
  for (const auto& r : records) {
    if (r.device != Device::mmc) continue;
    const RowKey key{rank(kMetricOrder, r.metric), r.task, rank(kPtmOrder, r.ptm_method)};
    auto& a = acc[key];
    if (a.row.metric.empty()) {
      a.row.metric = r.metric;
      a.row.unit = r.unit;
      a.row.task = r.task;
      a.row.ptm_method = r.ptm_method;
      a.row.ground_truth = ground_truth_device(r.task);
    }
    const TruthKey tk{r.participant_id, r.task, r.rep_index, r.metric};
    const auto it = truth.find(tk);
    if (it == truth.end()) {
      ++a.unmatched_mmc;
      continue;
    }
    a.matched.insert(tk);
    a.row.pairs.push_back({r.value, it->second->value, r.participant_id, r.rep_index});
  }

  CompareResult out;
  for (auto& [key, a] : acc) {
    ReportRow& row = a.row;
    std::size_t unmatched_truth = 0;
    for (const auto& [tk, rec] : truth) {
      if (rec->task == row.task && rec->metric == row.metric && !a.matched.contains(tk)) ++unmatched_truth;
    }
    const std::size_t unmatched = a.unmatched_mmc + unmatched_truth;
    out.unmatched += unmatched;
    const std::string label = fmt::format("{} {} {}", row.metric, to_string(row.task), row.ptm_method);
    if (unmatched > 0) {
      out.diagnostics.push_back(fmt::format("{}: dropped {} unmatched repetitions ({} mmc, {} reference)", label,
                                            unmatched, a.unmatched_mmc, unmatched_truth));
    }
    std::sort(row.pairs.begin(), row.pairs.end(), [](const MeasurementPair& x, const MeasurementPair& y) {
      return std::tie(x.participant_id, x.rep_index) < std::tie(y.participant_id, y.rep_index);
    });
    if (row.pairs.size() < 2) {
      out.diagnostics.push_back(fmt::format("{}: fewer than 2 pairs, row skipped", label));
      continue;
    }

    // Participants x repetitions of the markerless values.
    std::vector<std::string> pids;
    int max_rep = 0;
    for (const auto& p : row.pairs) {
      if (pids.empty() || pids.back() != p.participant_id) pids.push_back(p.participant_id);
      max_rep = std::max(max_rep, p.rep_index);
    }
    Eigen::MatrixXd reps = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(pids.size()), std::max(max_rep, 0),
                                                     std::numeric_limits<double>::quiet_NaN());
    for (const auto& p : row.pairs) {
      const auto i = std::find(pids.begin(), pids.end(), p.participant_id) - pids.begin();
      if (p.rep_index >= 1) reps(i, p.rep_index - 1) = p.mmc;
    }
    try {
      row.agreement = build_report({row.pairs, row.unit}, reps);
    } catch (const Error& e) {
      out.diagnostics.push_back(fmt::format("{}: {}", label, e.what()));
      continue;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_agreement_csv(const std::vector<ReportRow>& rows, const fs::path& path) {
  std::string out = "metric,unit,ground_truth,task,ptm_method,mae,bias,loa_low,loa_high,trr,icc,icc_label,n_pairs\n";
  for (const auto& r : rows) {
    const auto& a = r.agreement;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.metric, r.unit, to_string(r.ground_truth),
                       to_string(r.task), r.ptm_method, num(a.mae), num(a.bias), num(a.loa_low), num(a.loa_high),
                       num(a.trr), num(a.icc), to_string(a.icc_label), a.n_pairs);
  }
  text::write_file_atomic(path, out);
}

void write_pairs_csv(const std::vector<ReportRow>& rows, const fs::path& path) {
  std::string out = "metric,unit,task,ptm_method,participant_id,rep,mmc,truth\n";
  for (const auto& r : rows) {
    for (const auto& p : r.pairs) {
      out += fmt::format("{},{},{},{},{},{},{},{}\n", r.metric, r.unit, to_string(r.task), r.ptm_method,
                         p.participant_id, p.rep_index, num(p.mmc), num(p.truth));
    }
  }
  text::write_file_atomic(path, out);
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path, std::size_t columns) {
  const std::string body = text::read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  bool header = true;
  std::size_t line_no = 0;
  while (pos < body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string::npos) end = body.size();
    const auto line = text::trim(std::string_view(body).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto cells = text::split(line);
    if (cells.size() != columns) {
      throw ParseError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), line_no, columns, cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

IccLabel label_from_string(const std::string& s) {
  for (auto l : {IccLabel::poor, IccLabel::moderate, IccLabel::good, IccLabel::excellent}) {
    if (to_string(l) == s) return l;
  }
  throw ParseError(fmt::format("unknown ICC label '{}'", s));
}

}  // namespace

std::vector<ReportRow> read_compare_output(const fs::path& agreement_csv, const fs::path& pairs_csv) {
  std::vector<ReportRow> rows;
  for (const auto& c : read_csv_rows(agreement_csv, 13)) {
    ReportRow r;
    r.metric = c[0];
    r.unit = c[1];
    r.ground_truth = device_from_string(c[2]);
    r.task = task_from_string(c[3]);
    r.ptm_method = c[4];
    auto& a = r.agreement;
    a.mae = parse_num(c[5]);
    a.bias = parse_num(c[6]);
    a.loa_low = parse_num(c[7]);
    a.loa_high = parse_num(c[8]);
    a.trr = parse_num(c[9]);
    a.icc = parse_num(c[10]);
    a.icc_label = label_from_string(c[11]);
    a.n_pairs = static_cast<std::size_t>(parse_num(c[12]));
    rows.push_back(std::move(r));
  }
  for (const auto& c : read_csv_rows(pairs_csv, 8)) {
    const auto task = task_from_string(c[2]);
    auto it = std::find_if(rows.begin(), rows.end(), [&](const ReportRow& r) {
      return r.metric == c[0] && r.task == task && r.ptm_method == c[3];
    });
    if (it == rows.end()) throw ParseError(fmt::format("pair for unknown row {} {} {}", c[0], c[2], c[3]));
    it->pairs.push_back({parse_num(c[6]), parse_num(c[7]), c[4], static_cast<int>(parse_num(c[5]))});
  }
  return rows;
}

namespace {


std::vector<std::string> table_header() {
  return {"Metric", "Unit", "Ground truth", "Task", "PTM", "MAE", "Bias", "LoA", "TRR", "ICC", "Label", "n"};
}

std::vector<std::string> table_cells(const ReportRow& r) {
  const int d = decimals_for(r.unit);
  const auto& a = r.agreement;
  return {metric_title(r.metric),
          r.unit,
          device_title(r.ground_truth),
          std::string(to_string(r.task)),
          r.ptm_method,
          text::format_fixed(a.mae, d),
          text::format_fixed(a.bias, d),
          fmt::format("[{}, {}]", text::format_fixed(a.loa_low, d), text::format_fixed(a.loa_high, d)),
          text::format_fixed(a.trr, 2),
          text::format_fixed(a.icc, 2),
          std::string(to_string(a.icc_label)),
          std::to_string(a.n_pairs)};
}

}  // namespace

std::string format_table(const std::vector<ReportRow>& rows) {
  std::vector<std::vector<std::string>> lines = {table_header()};
  for (const auto& r : rows) lines.push_back(table_cells(r));
  std::vector<std::size_t> width(lines[0].size(), 0);
  for (const auto& l : lines) {
    for (std::size_t i = 0; i < l.size(); ++i) width[i] = std::max(width[i], l[i].size());
  }
  std::string out;
  auto emit = [&](const std::vector<std::string>& l) {
    std::string line;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (i) line += "  ";
      line += l[i] + std::string(width[i] - l[i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  };
  emit(lines[0]);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (std::size_t i = 1; i < lines.size(); ++i) emit(lines[i]);
  return out;
}

std::string scatter_basename(const ReportRow& row) {
  std::string ptm = row.ptm_method == "n/a" ? "na" : row.ptm_method;
  return fmt::format("{}_{}_{}", row.metric, to_string(row.task), ptm);
}

std::string bland_altman_svg(const ReportRow& row) {
  constexpr double W = 480, H = 360, L = 60, R = 20, T = 30, B = 50;
  const auto& a = row.agreement;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = std::min(a.loa_low, 0.0), ymax = std::max(a.loa_high, 0.0);
  for (const auto& p : row.pairs) {
    const double m = (p.mmc + p.truth) / 2.0;
    const double d = p.mmc - p.truth;
    xmin = std::min(xmin, m);
    xmax = std::max(xmax, m);
    ymin = std::min(ymin, d);
    ymax = std::max(ymax, d);
  }
  if (!(xmax > xmin)) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (!(ymax > ymin)) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double ypad = 0.1 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{} {} ({})</text>\n",
      W, H, W, H, W / 2, metric_title(row.metric), to_string(row.task), row.ptm_method);
  svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, T, L, H - B);
  auto hline = [&](double y, const char* colour, const char* dash, const std::string& label) {
    svg += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-dasharray=\"{}\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
        L, sy(y), W - R, sy(y), colour, dash, W - R, sy(y) - 3, label);
  };
  const int d = decimals_for(row.unit);
  hline(a.bias, "steelblue", "none", "bias " + text::format_fixed(a.bias, d));
  hline(a.loa_low, "firebrick", "4 3", "-1.96 SD " + text::format_fixed(a.loa_low, d));
  hline(a.loa_high, "firebrick", "4 3", "+1.96 SD " + text::format_fixed(a.loa_high, d));
  for (const auto& p : row.pairs) {
    svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"black\" fill-opacity=\"0.7\"/>\n",
                       sx((p.mmc + p.truth) / 2.0), sy(p.mmc - p.truth));
  }
  svg += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">mean of devices "
      "({})</text>\n",
      (L + W - R) / 2, H - 12, row.unit);
  svg += fmt::format(
      "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 14 {})\">MMC - reference ({})</text>\n",
      (T + H - B) / 2, (T + H - B) / 2, row.unit);
  svg += "</svg>\n";
  return svg;
}

ReportFiles cmd_report(const std::vector<ReportRow>& rows, const std::vector<std::string>& formats,
                       const fs::path& out_dir) {
  ReportFiles files;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(fmt::format("cannot create output directory {}: {}", out_dir.string(), ec.message()));
  if (rows.empty()) files.warnings.push_back("no report rows; writing an empty table");
  auto has = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };

  const auto table = out_dir / "table.txt";
  text::write_file_atomic(table, format_table(rows));
  files.written.push_back(table);
  if (has("csv")) {
    std::string csv = "metric,unit,ground_truth,task,ptm_method,mae,bias,loa_low,loa_high,trr,icc,icc_label,n_pairs\n";
    for (const auto& r : rows) {
      const int d = decimals_for(r.unit);
      const auto& a = r.agreement;
      csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.metric, r.unit, to_string(r.ground_truth),
                         to_string(r.task), r.ptm_method, text::format_fixed(a.mae, d), text::format_fixed(a.bias, d),
                         text::format_fixed(a.loa_low, d), text::format_fixed(a.loa_high, d),
                         text::format_fixed(a.trr, 2), text::format_fixed(a.icc, 2), to_string(a.icc_label), a.n_pairs);
    }
    const auto path = out_dir / "table.csv";
    text::write_file_atomic(path, csv);
    files.written.push_back(path);
  }
  if (!rows.empty() && (has("csv") || has("svg"))) fs::create_directories(out_dir / "scatter");
  for (const auto& r : rows) {
    const auto base = out_dir / "scatter" / scatter_basename(r);
    if (has("csv")) {
      std::string csv = "participant_id,rep,mean,diff\n";
      for (const auto& p : r.pairs) {
        csv += fmt::format("{},{},{},{}\n", p.participant_id, p.rep_index, num((p.mmc + p.truth) / 2.0),
                           num(p.mmc - p.truth));
      }
      auto path = base;
      path += ".csv";
      text::write_file_atomic(path, csv);
      files.written.push_back(path);
    }
    if (has("svg")) {
      auto path = base;
      path += ".svg";
      text::write_file_atomic(path, bland_altman_svg(r));
      files.written.push_back(path);
    }
  }
  return files;
}

}  // namespace mmc
