// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: analyze, compare, report, synth.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mmc/errors.hpp"
#include "mmc/pipeline.hpp"
#include "mmc/report.hpp"
#include "mmc/synth.hpp"
#include "mmc/text_io.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_formats(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    for (auto& f : mmc::text::split(r)) {
      const auto t = std::string(mmc::text::trim(f));
      if (t != "csv" && t != "json" && t != "svg") throw mmc::ValidationError(fmt::format("unknown format '{}'", t));
      out.push_back(t);
    }
  }
  return out;
}

// Metrics CSV files, or directories searched for */metrics.csv.
std::vector<mmc::MetricRecord> load_records(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() == "metrics.csv") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  std::vector<mmc::MetricRecord> records;
  for (const auto& f : files) {
    auto part = mmc::read_metrics_csv(f);
    records.insert(records.end(), part.begin(), part.end());
  }
  return records;
}

int run_analyze(const std::string& config_path, const std::vector<std::string>& manifests,
                const std::vector<std::string>& ptm, const std::string& out, const std::vector<std::string>& formats,
                std::size_t threads) {
  mmc::RunConfig cfg;
  if (!config_path.empty()) cfg = mmc::parse_run_config(config_path);
  for (const auto& m : manifests) cfg.manifests.emplace_back(m);
  if (!ptm.empty()) {
    cfg.ptm_methods.clear();
    for (const auto& p : ptm) cfg.ptm_methods.push_back(mmc::ptm_method_from_string(p));
  }
  if (!out.empty()) cfg.out_dir = out;
  if (!formats.empty()) cfg.formats = split_formats(formats);
  if (threads) cfg.threads = threads;
  if (cfg.manifests.empty()) throw mmc::ValidationError("no manifests given");

  const auto res = mmc::cmd_analyze(cfg);
  for (const auto& s : res.sessions) {
    for (const auto& d : s.diagnostics) std::cerr << fmt::format("{} {}: {}\n", s.participant_id, mmc::to_string(s.task), d);
  }
  std::cout << fmt::format("analyzed {} sessions ({} failed), {} records, {} discards -> {}\n", res.sessions.size(),
                           res.failed_sessions, res.records().size(), res.discards().size(), cfg.out_dir.string());
  return res.failed_sessions == res.sessions.size() ? 1 : 0;
}

int run_compare(const std::vector<std::string>& inputs, const std::string& out) {
  const auto records = load_records(inputs);
  const auto res = mmc::cmd_compare(records);
  const fs::path dir = out.empty() ? fs::path("out") : fs::path(out);
  fs::create_directories(dir);
  mmc::write_agreement_csv(res.rows, dir / "agreement.csv");
  mmc::write_pairs_csv(res.rows, dir / "pairs.csv");
  std::string diag;
  for (const auto& d : res.diagnostics) {
    std::cerr << d << "\n";
    diag += d + "\n";
  }
  mmc::text::write_file_atomic(dir / "compare_diagnostics.txt", diag);
  std::cout << mmc::format_table(res.rows);
  return 0;
}

int run_report(const std::string& input, const std::vector<std::string>& formats, const std::string& out) {
  const fs::path in(input);
  const auto rows = mmc::read_compare_output(in / "agreement.csv", in / "pairs.csv");
  const auto fmts = formats.empty() ? std::vector<std::string>{"csv", "svg"} : split_formats(formats);
  const auto files = mmc::cmd_report(rows, fmts, out.empty() ? in : fs::path(out));
  for (const auto& w : files.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << fmt::format("wrote {} files\n", files.written.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmcpipe: markerless motion capture metrics and agreement analysis"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::vector<std::string> manifests, ptm, formats, inputs;
  std::size_t threads = 0;

  auto* analyze = app.add_subcommand("analyze", "Compute per-repetition metrics for each session");
  analyze->add_option("--config", config_path, "Run configuration (JSON)");
  analyze->add_option("manifests", manifests, "Session manifests (in addition to the config)");
  analyze->add_option("--ptm", ptm, "PTM method(s)")->check(CLI::IsMember({"gravity", "height", "object"}));
  analyze->add_option("--out", out, "Output directory");
  analyze->add_option("--format", formats, "Output formats: csv, json");
  analyze->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* compare = app.add_subcommand("compare", "Agreement between MMC and the reference device");
  compare->add_option("inputs", inputs, "metrics.csv files or analyze output directories")->required();
  compare->add_option("--out", out, "Output directory");

  std::string report_in;
  auto* report = app.add_subcommand("report", "Table and Bland-Altman plots from compare output");
  report->add_option("input", report_in, "compare output directory")->required();
  report->add_option("--format", formats, "csv, svg");
  report->add_option("--out", out, "Output directory (default: the input directory)");

  std::string kind = "cmj", task = "CMJBL", pid = "P01";
  mmc::SynthParams sp;
  bool mini = false;
  int participants = 4;
  std::uint64_t seed = 2024;
  double height = 0.0;
  std::string side = "right";
  auto* synth = app.add_subcommand("synth", "Write a synthetic session fixture or mini study");
  synth->add_flag("--mini-study", mini, "Write the synthetic agreement study with a run config");
  synth->add_option("--participants", participants, "Mini-study participants");
  synth->add_option("--kind", kind, "cmj|dropjump|rjt|press|rotation|curl");
  synth->add_option("--task", task, "Task code written to the manifest");
  synth->add_option("--participant", pid, "Participant id");
  synth->add_option("--fps", sp.fps, "MMC frame rate");
  synth->add_option("--reps", sp.reps, "Repetitions");
  synth->add_option("--flight", sp.flight_s, "Flight time (s)");
  synth->add_option("--contact", sp.contact_s, "Contact time (s)");
  synth->add_option("--amplitude", sp.amplitude_m, "Bar travel (m)");
  synth->add_option("--concentric", sp.concentric_s, "Concentric duration (s)");
  synth->add_option("--rom", sp.rom_deg, "Range of motion (deg)");
  synth->add_option("--ptm-true", sp.ptm_true, "Metres per pixel");
  synth->add_option("--noise", sp.noise_sigma_px, "Pixel noise sigma");
  synth->add_option("--stature", sp.stature_m, "Stature (m)");
  synth->add_option("--height", height, "Height written to the manifest (default: stature)");
  synth->add_option("--side", side, "Dominant side")->check(CLI::IsMember({"left", "right"}));
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return run_analyze(config_path, manifests, ptm, out, formats, threads);
    if (compare->parsed()) return run_compare(inputs, out);
    if (report->parsed()) return run_report(report_in, formats, out);
    if (synth->parsed()) {
      if (mini) {
        const auto paths = mmc::write_mini_study(out, participants, sp.reps, seed);
        nlohmann::json cfg;
        cfg["manifests"] = nlohmann::json::array();
        for (const auto& p : paths) cfg["manifests"].push_back(p.lexically_relative(out).generic_string());
        mmc::text::write_file_atomic(fs::path(out) / "config.json", cfg.dump(2) + "\n");
        std::cout << fmt::format("wrote {} sessions and config.json to {}\n", paths.size(), out);
        return 0;
      }
      sp.kind = mmc::synth_kind_from_string(kind);
      sp.seed = seed;
      sp.dominant_side = mmc::side_from_string(side);
      mmc::FixtureOptions fo;
      fo.participant_id = pid;
      fo.task = mmc::task_from_string(task);
      fo.height_m = height > 0.0 ? height : sp.stature_m;
      const auto path = mmc::write_fixture(mmc::generate(sp), sp, fo, out);
      std::cout << path.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
