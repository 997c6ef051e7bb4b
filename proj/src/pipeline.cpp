// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "mmc/errors.hpp"
#include "mmc/kinemetrics.hpp"
#include "mmc/text_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mmc {

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::set<std::string> kConfigKeys = {
    "manifests",     "ptm",   "out_dir",  "formats",      "savgol_window_mmc",     "savgol_window_omc",
    "savgol_order",  "confidence_threshold", "swap_drop_fraction", "t1_s", "t2_s", "expected_reps",
    "min_peak_separation_s", "min_prominence_frac", "threads"};

double json_number(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ValidationError(fmt::format("config key '{}' must be a number", key));
  return v.get<double>();
}

std::size_t json_count(const json& doc, const char* key) {
  const double v = json_number(doc, key);
  if (v < 0.0 || v != std::floor(v)) throw ValidationError(fmt::format("config key '{}' must be a whole number", key));
  return static_cast<std::size_t>(v);
}

std::vector<std::string> json_strings(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_string()) throw ValidationError(fmt::format("config key '{}' must hold strings", key));
      out.push_back(e.get<std::string>());
    }
  } else {
    throw ValidationError(fmt::format("config key '{}' must be a string or a list of strings", key));
  }
  return out;
}

}  // namespace

RunConfig parse_run_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("config: {}", e.what()));
  }
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!kConfigKeys.contains(key)) throw ValidationError(fmt::format("unknown config key '{}'", key));
  }
  RunConfig c;
  if (doc.contains("manifests")) {
    for (auto& m : json_strings(doc, "manifests")) c.manifests.emplace_back(m);
  }
  if (doc.contains("ptm")) {
    for (auto& m : json_strings(doc, "ptm")) c.ptm_methods.push_back(ptm_method_from_string(m));
  }
  if (doc.contains("out_dir")) c.out_dir = json_strings(doc, "out_dir").at(0);
  if (doc.contains("formats")) c.formats = json_strings(doc, "formats");
  if (doc.contains("savgol_window_mmc")) c.savgol_window_mmc = json_count(doc, "savgol_window_mmc");
  if (doc.contains("savgol_window_omc")) c.savgol_window_omc = json_count(doc, "savgol_window_omc");
  if (doc.contains("savgol_order")) c.savgol_order = static_cast<int>(json_count(doc, "savgol_order"));
  if (doc.contains("confidence_threshold")) c.confidence_threshold = json_number(doc, "confidence_threshold");
  if (doc.contains("swap_drop_fraction")) c.swap_drop_fraction = json_number(doc, "swap_drop_fraction");
  if (doc.contains("t1_s")) c.t1_s = json_number(doc, "t1_s");
  if (doc.contains("t2_s")) c.t2_s = json_number(doc, "t2_s");
  if (doc.contains("expected_reps")) c.expected_reps = static_cast<int>(json_count(doc, "expected_reps"));
  if (doc.contains("min_peak_separation_s")) c.min_peak_separation_s = json_number(doc, "min_peak_separation_s");
  if (doc.contains("min_prominence_frac")) c.min_prominence_frac = json_number(doc, "min_prominence_frac");
  if (doc.contains("threads")) c.threads = json_count(doc, "threads");
  for (const auto& f : c.formats) {
    if (f != "csv" && f != "json" && f != "svg") throw ValidationError(fmt::format("unknown format '{}'", f));
  }
  if (c.confidence_threshold < 0.0 || c.confidence_threshold > 1.0) {
    throw ValidationError("confidence_threshold must lie in [0, 1]");
  }
  return c;
}

RunConfig parse_run_config(const fs::path& path) {
  RunConfig c = parse_run_config_text(text::read_file(path));
  for (auto& m : c.manifests) {
    if (m.is_relative()) m = path.parent_path() / m;
  }
  return c;
}

std::vector<PtmMethod> valid_ptm_methods(TaskCode task) {
  switch (task) {
    case TaskCode::CMJBL:
    case TaskCode::CMJUL:
    case TaskCode::DJBL:
    case TaskCode::DJUL: return {PtmMethod::gravity, PtmMethod::height};
    case TaskCode::OHP:
    case TaskCode::BSQ: return {PtmMethod::height, PtmMethod::object};
    default: return {};
  }
}

SegmentationConfig default_segmentation(TaskCode task) {
  SegmentationConfig c;
  switch (task) {
    case TaskCode::CMJBL:
    case TaskCode::CMJUL:
      c.t1_s = 1.5;
      c.t2_s = 1.0;
      break;
    case TaskCode::OHP:
      c.t1_s = 2.0;
      c.t2_s = 0.5;
      break;
    case TaskCode::BSQ:
      c.t1_s = 0.4;
      c.t2_s = 2.0;
      break;
    case TaskCode::HIR:
    case TaskCode::HER:
      c.t1_s = 1.6;
      c.t2_s = 1.6;
      break;
    case TaskCode::NDC:
    case TaskCode::SLS:
    case TaskCode::SLR:
      c.t1_s = 2.1;
      c.t2_s = 2.6;
      break;
    default: break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Session analysis

namespace {

constexpr double kCalibrationRestS = 0.5;

std::string method_label(std::optional<PtmMethod> m) { return m ? std::string(to_string(*m)) : "n/a"; }

bool unilateral(TaskCode t) { return t == TaskCode::CMJUL || t == TaskCode::DJUL; }

std::string side_code(Side s) { return s == Side::left ? "L" : "R"; }

std::size_t fit_window(std::size_t window, std::size_t n) {
  if (window > n) window = n % 2 == 1 ? n : n - 1;
  return window;
}

Signal smoothed(const Signal& s, std::size_t window, int order) {
  const std::size_t w = fit_window(window, s.size());
  if (w <= static_cast<std::size_t>(order)) return s;
  return smooth(s, w, order);
}

std::vector<Vec2> smoothed(const std::vector<Vec2>& traj, double fps, std::size_t window, int order) {
  Signal xs{{}, fps, Unit::px};
  Signal ys{{}, fps, Unit::px};
  for (const auto& p : traj) {
    xs.values.push_back(p.x);
    ys.values.push_back(p.y);
  }
  xs = smoothed(xs, window, order);
  ys = smoothed(ys, window, order);
  std::vector<Vec2> out(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) out[i] = {xs.values[i], ys.values[i]};
  return out;
}

Signal slice(const Signal& s, std::size_t first, std::size_t last) {
  Signal out{{}, s.fps, s.unit};
  out.values.assign(s.values.begin() + static_cast<std::ptrdiff_t>(first),
                    s.values.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  return out;
}

template <class T>
std::vector<T> slice(const std::vector<T>& v, std::size_t first, std::size_t last) {
  return {v.begin() + static_cast<std::ptrdiff_t>(first), v.begin() + static_cast<std::ptrdiff_t>(last) + 1};
}

FrameRange seg_range(const Segment& s) { return {s.start_index, s.start_index + s.values.size() - 1}; }

FrameRange rest_range(const Signal& s, double rest_s) {
  const auto n = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(rest_s * s.fps)), 1, s.size());
  return {0, n - 1};
}

Signal mean_of(const Signal& a, const Signal& b) {
  Signal out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = (a.values[i] + b.values[i]) / 2.0;
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// One stream of one device, reduced to whatever the task needs.
struct Stream {
  Device device{Device::mmc};
  double fps{30.0};
  std::size_t window{11};
  Signal primary;                 // segmentation and linear metrics
  Signal com;                     // vertical COM proxy (MMC jumps only)
  std::vector<Vec2> proximal;     // angle tasks
  std::vector<Vec2> joint;
  std::vector<Vec2> distal;
  std::vector<std::size_t> flagged;
};

class SessionAnalyzer {
 public:
  SessionAnalyzer(const Session& s, const RunConfig& cfg, SessionResult& res)
      : s_(s), m_(s.manifest), cfg_(cfg), res_(res) {}

  void run() {
    seg_ = segmentation();
    methods_ = methods();
    analyze_mmc();
    analyze_truth();
  }

 private:
  // -- helpers -------------------------------------------------------------

  void record(int rep, Device dev, std::optional<PtmMethod> ptm, const char* metric, double value, const char* unit) {
    res_.records.push_back({m_.participant_id, m_.task, rep, dev, method_label(ptm), metric, value, unit});
  }

  void discard(int rep, Device dev, std::string reason) {
    res_.discards.push_back({m_.participant_id, m_.task, rep, dev, std::move(reason)});
  }

  void note(std::string msg) { res_.diagnostics.push_back(std::move(msg)); }

  SegmentationConfig segmentation() const {
    SegmentationConfig c = default_segmentation(m_.task);
    auto pick = [](auto& dst, const auto& a, const auto& b) {
      if (b) {
        dst = *b;
      } else if (a) {
        dst = *a;
      }
    };
    pick(c.t1_s, cfg_.t1_s, m_.t1_s);
    pick(c.t2_s, cfg_.t2_s, m_.t2_s);
    pick(c.expected_reps, cfg_.expected_reps, m_.expected_reps);
    pick(c.min_peak_separation_s, cfg_.min_peak_separation_s, m_.min_peak_separation_s);
    pick(c.min_prominence_frac, cfg_.min_prominence_frac, m_.min_prominence_frac);
    c.validate();
    return c;
  }

  // Methods that do not apply to the task are warnings; when none of the
  // selected methods apply, every valid method is used.
  std::vector<PtmMethod> methods() {
    const auto valid = valid_ptm_methods(m_.task);
    if (cfg_.ptm_methods.empty()) return valid;
    std::vector<PtmMethod> out;
    for (auto p : cfg_.ptm_methods) {
      if (std::find(valid.begin(), valid.end(), p) != valid.end()) {
        out.push_back(p);
      } else if (!valid.empty()) {
        note(fmt::format("warning: ptm {} does not apply to {}", to_string(p), to_string(m_.task)));
      }
    }
    if (out.empty() && !valid.empty()) {
      note(fmt::format("warning: using every valid ptm method for {}", to_string(m_.task)));
      return valid;
    }
    return out;
  }

  std::size_t mmc_window() const { return cfg_.savgol_window_mmc.value_or(default_savgol_window(m_.mmc_fps)); }
  std::size_t omc_window(double fps) const { return cfg_.savgol_window_omc.value_or(default_savgol_window(fps)); }

  Side side() const { return m_.dominant_side; }

  // -- MMC -----------------------------------------------------------------

  void analyze_mmc() {
    const KeypointSeries& raw = *s_.mmc;
    masked_ = mask_low_confidence(raw, cfg_.confidence_threshold);
    flagged_ = detect_limb_swaps(raw, side());
    if (!flagged_.empty()) {
      note(fmt::format("mmc: {} frames flagged as possible limb swaps", flagged_.size()));
    }
    try {
      switch (m_.task) {
        case TaskCode::CMJBL:
        case TaskCode::CMJUL: mmc_cmj(); break;
        case TaskCode::DJBL:
        case TaskCode::DJUL: mmc_dropjump(); break;
        case TaskCode::RJT: mmc_rjt(); break;
        case TaskCode::OHP:
        case TaskCode::BSQ: mmc_barbell(); break;
        default: angle_task(mmc_angle_stream()); break;
      }
    } catch (const Error& e) {
      discard(-1, Device::mmc, e.what());
      note(fmt::format("mmc: session skipped: {}", e.what()));
    }
  }

  Signal toe_px() const {
    if (unilateral(m_.task)) return masked_.vertical_px(big_toe_of(side()));
    return mean_of(masked_.vertical_px(Body25::LBigToe), masked_.vertical_px(Body25::RBigToe));
  }

  bool swapped(int rep, FrameRange r, Device dev) {
    if (dev != Device::mmc) return false;
    const double frac = flagged_fraction(flagged_, r);
    if (frac > cfg_.swap_drop_fraction) {
      discard(rep, dev, fmt::format("limb swap: {:.0f}% of frames flagged", 100.0 * frac));
      return true;
    }
    return false;
  }

  void log_dropped(const SegmentationResult& sr, Device dev) {
    for (std::size_t k = 0; k < sr.dropped_reps.size(); ++k) {
      discard(sr.dropped_reps[k] + 1, dev, k < sr.diagnostics.size() ? sr.diagnostics[k] : "window outside recording");
    }
  }

  // Scale for each requested method; failures are reported per method.
  struct Scales {
    std::vector<std::pair<PtmMethod, PtmScale>> ok;
    std::vector<std::pair<PtmMethod, std::string>> failed;
  };

  Scales scales(const std::vector<PtmMethod>& wanted, const std::function<PtmScale()>& gravity) {
    Scales out;
    for (auto method : wanted) {
      try {
        switch (method) {
          case PtmMethod::height:
            if (!m_.height_m) throw ValidationError("manifest has no height_m");
            masked_.require_usable(Body25::LShoulder);
            out.ok.emplace_back(method, ptm_from_height(masked_, *m_.height_m, kCalibrationRestS));
            break;
          case PtmMethod::object:
            if (!m_.object_len_px) throw ValidationError("manifest has no object_len_px");
            out.ok.emplace_back(method, ptm_from_object(*m_.object_len_px, m_.object_len_m));
            break;
          case PtmMethod::gravity: out.ok.emplace_back(method, gravity()); break;
        }
        note(fmt::format("mmc: ptm {} = {:.6g} m/px", to_string(method), out.ok.back().second.metres_per_pixel));
      } catch (const Error& e) {
        out.failed.emplace_back(method, e.what());
        note(fmt::format("mmc: ptm {} unavailable: {}", to_string(method), e.what()));
      }
    }
    return out;
  }

  void fail_methods(const Scales& sc, const std::vector<int>& reps) {
    for (const auto& [method, why] : sc.failed) {
      for (int r : reps) discard(r, Device::mmc, fmt::format("ptm {}: {}", to_string(method), why));
    }
  }

  // Gravity scale as the median of per-window fits on the COM proxy.
  PtmScale gravity_over(const Signal& com, const std::vector<FrameRange>& windows) {
    std::vector<double> fits;
    std::string last_error = "no windows";
    for (const auto& w : windows) {
      try {
        fits.push_back(ptm_from_gravity(slice(com, w.first, w.last)).metres_per_pixel);
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
    if (fits.empty()) throw CalibrationError(fmt::format("no usable free fall: {}", last_error));
    return {median(fits), PtmMethod::gravity, 0.0};
  }

  void mmc_cmj() {
    const Signal toe = toe_px();
    const Signal toe_s = smoothed(toe, mmc_window(), cfg_.savgol_order);
    const auto maxima = find_rep_maxima(toe_s, seg_);
    const auto sr = segment_reps(toe_s, maxima, seg_, Device::mmc);
    log_dropped(sr, Device::mmc);
    const Signal com = masked_.vertical_px(Body25::MidHip);
    std::vector<FrameRange> windows;
    for (const auto& sg : sr.segments) windows.push_back(seg_range(sg));
    const auto sc = scales(methods_, [&] { return gravity_over(com, windows); });

    std::vector<int> kept;
    for (const auto& sg : sr.segments) {
      const int rep = sg.rep_index + 1;
      if (swapped(rep, seg_range(sg), Device::mmc)) continue;
      kept.push_back(rep);
      for (const auto& [method, ptm] : sc.ok) {
        try {
          const auto jm = jump_height(apply_scale(sg.values, ptm));
          record(rep, Device::mmc, method, "jump_height", jm.height_m * 100.0, "cm");
        } catch (const Error& e) {
          discard(rep, Device::mmc, fmt::format("ptm {}: {}", to_string(method), e.what()));
        }
      }
    }
    fail_methods(sc, kept);
  }

  void mmc_dropjump() {
    if (m_.segments.empty()) throw ValidationError("drop jumps need manual segments in the manifest");
    const Signal toe = toe_px();
    const Signal toe_s = smoothed(toe, mmc_window(), cfg_.savgol_order);
    const Signal com = masked_.vertical_px(Body25::MidHip);
    const auto sr = segment_manual(toe, m_.segments, Device::mmc);
    log_dropped(sr, Device::mmc);

    struct Rep {
      int rep;
      FrameRange range;
      std::optional<DropJumpEvents> events;
    };
    std::vector<Rep> reps;
    std::vector<FrameRange> falls;
    for (const auto& sg : sr.segments) {
      Rep r{sg.rep_index + 1, seg_range(sg), std::nullopt};
      if (swapped(r.rep, r.range, Device::mmc)) continue;
      try {
        r.events = dropjump_events(sg.values);
        // The jump's free fall starts after the drop landing.
        falls.push_back({r.range.first + r.events->speed_peaks[0] + 1, r.range.last});
      } catch (const Error& e) {
        discard(r.rep, Device::mmc, e.what());
        continue;
      }
      reps.push_back(r);
    }
    const auto sc = scales(methods_, [&] { return gravity_over(com, falls); });
    std::vector<int> kept;
    for (const auto& r : reps) {
      kept.push_back(r.rep);
      record(r.rep, Device::mmc, std::nullopt, "flight_time", r.events->timing.flight_s, "s");
      record(r.rep, Device::mmc, std::nullopt, "contact_time", r.events->timing.contact_s, "s");
      for (const auto& [method, ptm] : sc.ok) {
        try {
          const auto jm = dropjump_height(apply_scale(slice(toe_s, r.range.first, r.range.last), ptm));
          record(r.rep, Device::mmc, method, "jump_height", jm.height_m * 100.0, "cm");
        } catch (const Error& e) {
          discard(r.rep, Device::mmc, fmt::format("ptm {}: {}", to_string(method), e.what()));
        }
      }
    }
    fail_methods(sc, kept);
  }

  void mmc_rjt() {
    const Signal toe = toe_px();
    const double frac = flagged_fraction(flagged_, {0, toe.size() - 1});
    if (frac > cfg_.swap_drop_fraction) {
      throw QualityError(fmt::format("limb swap: {:.0f}% of frames flagged", 100.0 * frac));
    }
    // Timing only needs metres for the airborne threshold.
    const Signal com = masked_.vertical_px(Body25::MidHip);
    auto sc = scales({PtmMethod::height}, {});
    if (sc.ok.empty()) sc = scales({PtmMethod::gravity}, [&] { return ptm_from_gravity(com); });
    if (sc.ok.empty()) throw CalibrationError("repeated jumps need a height or gravity scale for the airborne threshold");
    const auto timings = flight_contact_rjt(apply_scale(toe, sc.ok.front().second));
    for (std::size_t k = 0; k < timings.size(); ++k) {
      const int rep = static_cast<int>(k) + 1;
      record(rep, Device::mmc, std::nullopt, "flight_time", timings[k].flight_s, "s");
      record(rep, Device::mmc, std::nullopt, "contact_time", timings[k].contact_s, "s");
    }
  }

  Signal wrist_px() const {
    const KeypointSeries& raw = *s_.mmc;
    const Signal l = masked_.vertical_px(Body25::LWrist);
    const Signal r = masked_.vertical_px(Body25::RWrist);
    const auto cl = raw.confidence(Body25::LWrist);
    const auto cr = raw.confidence(Body25::RWrist);
    Signal out = l;
    const double thr = cfg_.confidence_threshold;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (cl[i] >= thr && cr[i] >= thr) {
        out.values[i] = (l.values[i] + r.values[i]) / 2.0;
      } else {
        out.values[i] = cl[i] >= cr[i] ? l.values[i] : r.values[i];
      }
    }
    return out;
  }

  Signal negated(Signal s) const {
    for (auto& v : s.values) v = -v;
    return s;
  }

  // Segments of a barbell signal: maxima of the bar for presses, of the
  // inverted bar for squats.
  SegmentationResult bar_segments(const Signal& bar, Device dev) {
    if (m_.task == TaskCode::BSQ) {
      const Signal inv = negated(bar);
      const auto maxima = find_rep_maxima(inv, seg_);
      auto sr = segment_reps(inv, maxima, seg_, dev);
      for (auto& sg : sr.segments) sg.values = negated(sg.values);
      return sr;
    }
    return segment_reps(bar, find_rep_maxima(bar, seg_), seg_, dev);
  }

  // Peak from the smoothed segment, mean from the raw one over the same phase.
  void emit_velocity(int rep, Device dev, std::optional<PtmMethod> method, const Signal& seg_m, const Signal& raw_m,
                     std::size_t window) {
    const auto vm = velocity_metrics(seg_m, refine_concentric_window(seg_m, concentric_window(seg_m)));
    const double mean = mean_concentric_velocity(raw_m, seg_m, vm.concentric_window, window / 2);
    record(rep, dev, method, "peak_velocity", vm.peak_mps, "m/s");
    record(rep, dev, method, "mean_velocity", mean, "m/s");
  }

  void mmc_barbell() {
    const Signal raw = wrist_px();
    const Signal bar = smoothed(raw, mmc_window(), cfg_.savgol_order);
    const auto sr = bar_segments(bar, Device::mmc);
    log_dropped(sr, Device::mmc);
    const auto sc = scales(methods_, [] () -> PtmScale { throw CalibrationError("gravity needs a jump"); });
    std::vector<int> kept;
    for (const auto& sg : sr.segments) {
      const int rep = sg.rep_index + 1;
      if (swapped(rep, seg_range(sg), Device::mmc)) continue;
      kept.push_back(rep);
      for (const auto& [method, ptm] : sc.ok) {
        try {
          const FrameRange r = seg_range(sg);
          emit_velocity(rep, Device::mmc, method, apply_scale(sg.values, ptm),
                        apply_scale(slice(raw, r.first, r.last), ptm), mmc_window());
        } catch (const Error& e) {
          discard(rep, Device::mmc, fmt::format("ptm {}: {}", to_string(method), e.what()));
        }
      }
    }
    fail_methods(sc, kept);
  }

  // -- angle tasks (both devices) --------------------------------------------

  Stream mmc_angle_stream() {
    Stream st;
    st.device = Device::mmc;
    st.fps = masked_.fps;
    st.window = mmc_window();
    const Side sd = side();
    st.proximal = masked_.trajectory(hip_of(sd));
    st.joint = masked_.trajectory(knee_of(sd));
    st.distal = masked_.trajectory(ankle_of(sd));
    st.flagged = flagged_;
    return st;
  }

  Stream omc_angle_stream(const MarkerSeries& omc) {
    Stream st;
    st.device = Device::omc;
    st.fps = omc.fps;
    st.window = omc_window(omc.fps);
    const bool front = m_.camera_view == CameraView::front || m_.camera_view == CameraView::rear;
    const std::string sfx = side_code(side());
    auto proj = [&](const std::string& name) {
      std::vector<Vec2> out;
      for (const auto& p : omc.at(name)) out.push_back(front ? Vec2{p.x / 1000.0, p.z / 1000.0} : Vec2{p.y / 1000.0, p.z / 1000.0});
      return out;
    };
    st.proximal = proj("hip_" + sfx);
    st.joint = proj("knee_" + sfx);
    st.distal = proj("ankle_" + sfx);
    return st;
  }

  void angle_task(Stream st) {
    const Device dev = st.device;
    const int order = cfg_.savgol_order;
    const auto prox = smoothed(st.proximal, st.fps, st.window, order);
    const auto joint = smoothed(st.joint, st.fps, st.window, order);
    const auto distal = smoothed(st.distal, st.fps, st.window, order);
    const std::size_t n = joint.size();
    if (n < 2) throw QualityError("recording too short");
    const Signal probe{std::vector<double>(n, 0.0), st.fps, Unit::deg};
    const FrameRange rec_rest = rest_range(probe, kCalibrationRestS);

    const bool hip = m_.task == TaskCode::HIR || m_.task == TaskCode::HER;
    Signal angle;
    if (hip) {
      angle = displacement_angle_series(joint, distal, rec_rest, st.fps);
    } else if (m_.task == TaskCode::SLR) {
      angle = displacement_angle_series(prox, distal, rec_rest, st.fps);
    } else {
      angle = joint_angle_series(prox, joint, distal, st.fps);
    }
    // Segment on the excursion from the starting posture.
    Signal excursion = angle;
    double rest = 0.0;
    for (std::size_t t = rec_rest.first; t <= rec_rest.last; ++t) rest += angle.values[t];
    rest /= static_cast<double>(rec_rest.length());
    for (auto& v : excursion.values) v = std::abs(v - rest);
    const auto sr = segment_reps(excursion, find_rep_maxima(excursion, seg_), seg_, dev);
    log_dropped(sr, dev);
    // Every repetition is measured from the starting posture of the recording.
    const TibiaRest tibia = hip ? tibia_rest(joint, distal, rec_rest) : TibiaRest{};

    for (const auto& sg : sr.segments) {
      const int rep = sg.rep_index + 1;
      const FrameRange r = seg_range(sg);
      if (swapped(rep, r, dev)) continue;
      try {
        const Signal seg_angle = slice(angle, r.first, r.last);
        if (hip) {
          const auto am = hip_rotation_rom(slice(joint, r.first, r.last), slice(distal, r.first, r.last), tibia, side());
          const double value = m_.task == TaskCode::HIR ? *am.internal_deg : *am.external_deg;
          record(rep, dev, std::nullopt, "rom", value, "deg");
        } else {
          record(rep, dev, std::nullopt, "rom", rom_from_angle_series(seg_angle, rest).rom_deg, "deg");
          if (m_.task == TaskCode::NDC || m_.task == TaskCode::SLS) {
            record(rep, dev, std::nullopt, "angular_velocity", mean_angular_velocity(seg_angle), "deg/s");
          }
        }
      } catch (const Error& e) {
        discard(rep, dev, e.what());
      }
    }
  }

  // -- reference devices -----------------------------------------------------

  void analyze_truth() {
    const Device dev = ground_truth_device(m_.task);
    try {
      if (dev == Device::forceplate) {
        if (!s_.forceplate) throw ValidationError("no force-plate stream");
        forceplate_truth(*s_.forceplate);
      } else {
        if (!s_.omc) throw ValidationError("no OMC stream");
        omc_truth(*s_.omc);
      }
    } catch (const Error& e) {
      discard(-1, dev, e.what());
      note(fmt::format("{}: session skipped: {}", to_string(dev), e.what()));
    }
  }

  void forceplate_truth(const ForcePlateRecord& fp) {
    const Device dev = Device::forceplate;
    if (m_.task == TaskCode::DJBL || m_.task == TaskCode::DJUL) {
      for (std::size_t k = 0; k < m_.segments.size(); ++k) {
        const int rep = static_cast<int>(k) + 1;
        const auto first = static_cast<long long>(std::llround(m_.segments[k].start_s * fp.fps));
        const auto last = static_cast<long long>(std::llround(m_.segments[k].end_s * fp.fps));
        if (first < 0 || last >= static_cast<long long>(fp.vertical_force.size()) || last <= first) {
          discard(rep, dev, "manual window outside the force record");
          continue;
        }
        ForcePlateRecord part{slice(fp.vertical_force, static_cast<std::size_t>(first), static_cast<std::size_t>(last)),
                              fp.fps};
        const auto ev = forceplate_events(part);
        if (ev.flights_s.size() != 1 || ev.contacts_s.empty()) {
          discard(rep, dev, fmt::format("expected one flight and one contact, found {} and {}", ev.flights_s.size(),
                                        ev.contacts_s.size()));
          continue;
        }
        record(rep, dev, std::nullopt, "jump_height", jump_height_from_flight(ev.flights_s[0]) * 100.0, "cm");
        record(rep, dev, std::nullopt, "flight_time", ev.flights_s[0], "s");
        record(rep, dev, std::nullopt, "contact_time", ev.contacts_s[0], "s");
      }
      return;
    }
    const auto ev = forceplate_events(fp);
    if (m_.task == TaskCode::RJT) {
      if (ev.flights_s.size() < 2) throw QualityError("force record holds fewer than two flights");
      for (std::size_t k = 0; k + 1 < ev.flights_s.size() && k < ev.contacts_s.size(); ++k) {
        const int rep = static_cast<int>(k) + 1;
        record(rep, dev, std::nullopt, "flight_time", ev.flights_s[k + 1], "s");
        record(rep, dev, std::nullopt, "contact_time", ev.contacts_s[k], "s");
      }
      return;
    }
    if (ev.flights_s.size() != static_cast<std::size_t>(seg_.expected_reps)) {
      note(fmt::format("forceplate: found {} flights, expected {}", ev.flights_s.size(), seg_.expected_reps));
    }
    for (std::size_t k = 0; k < ev.flights_s.size(); ++k) {
      record(static_cast<int>(k) + 1, dev, std::nullopt, "jump_height", jump_height_from_flight(ev.flights_s[k]) * 100.0,
             "cm");
    }
  }

  void omc_truth(const MarkerSeries& omc) {
    if (m_.task == TaskCode::OHP || m_.task == TaskCode::BSQ) {
      const auto& l = omc.at("bar_L");
      const auto& r = omc.at("bar_R");
      Signal bar{{}, omc.fps, Unit::m};
      for (std::size_t i = 0; i < l.size(); ++i) bar.values.push_back((l[i].z + r[i].z) / 2000.0);
      const Signal raw = bar;
      bar = smoothed(bar, omc_window(omc.fps), cfg_.savgol_order);
      const auto sr = bar_segments(bar, Device::omc);
      log_dropped(sr, Device::omc);
      for (const auto& sg : sr.segments) {
        try {
          const FrameRange r = seg_range(sg);
          emit_velocity(sg.rep_index + 1, Device::omc, std::nullopt, sg.values, slice(raw, r.first, r.last),
                        omc_window(omc.fps));
        } catch (const Error& e) {
          discard(sg.rep_index + 1, Device::omc, e.what());
        }
      }
      return;
    }
    angle_task(omc_angle_stream(omc));
  }

  const Session& s_;
  const SessionManifest& m_;
  const RunConfig& cfg_;
  SessionResult& res_;
  SegmentationConfig seg_;
  std::vector<PtmMethod> methods_;
  KeypointSeries masked_;
  std::vector<std::size_t> flagged_;
};

}  // namespace

SessionResult analyze_session(const Session& session, const RunConfig& config) {
  SessionResult res;
  res.participant_id = session.manifest.participant_id;
  res.task = session.manifest.task;
  res.diagnostics = session.diagnostics;
  if (!session.mmc) throw ValidationError("session has no MMC stream");
  SessionAnalyzer(session, config, res).run();
  const bool any_mmc = std::any_of(res.records.begin(), res.records.end(),
                                   [](const MetricRecord& r) { return r.device == Device::mmc; });
  res.ok = any_mmc;
  return res;
}

std::vector<MetricRecord> AnalyzeResult::records() const {
  std::vector<MetricRecord> out;
  for (const auto& s : sessions) out.insert(out.end(), s.records.begin(), s.records.end());
  return out;
}

std::vector<Discard> AnalyzeResult::discards() const {
  std::vector<Discard> out;
  for (const auto& s : sessions) out.insert(out.end(), s.discards.begin(), s.discards.end());
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

const char* kMetricsHeader = "participant_id,task,rep,device,ptm_method,metric,value,unit";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_discards_csv(const std::vector<Discard>& discards, const fs::path& path) {
  std::string out = "participant_id,task,rep,device,reason\n";
  for (const auto& d : discards) {
    out += fmt::format("{},{},{},{},{}\n", csv_field(d.participant_id), to_string(d.task),
                       d.rep_index < 0 ? std::string("all") : std::to_string(d.rep_index), to_string(d.device),
                       csv_field(d.reason));
  }
  text::write_file_atomic(path, out);
}

}  // namespace

void write_metrics_csv(const std::vector<MetricRecord>& records, const fs::path& path) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(r.participant_id), to_string(r.task), r.rep_index,
                       to_string(r.device), r.ptm_method, r.metric, text::format_double(r.value), r.unit);
  }
  text::write_file_atomic(path, out);
}

void write_metrics_json(const std::vector<MetricRecord>& records, const fs::path& path) {
  json arr = json::array();
  for (const auto& r : records) {
    arr.push_back({{"participant_id", r.participant_id},
                   {"task", std::string(to_string(r.task))},
                   {"rep", r.rep_index},
                   {"device", std::string(to_string(r.device))},
                   {"ptm_method", r.ptm_method},
                   {"metric", r.metric},
                   {"value", r.value},
                   {"unit", r.unit}});
  }
  text::write_file_atomic(path, arr.dump(2) + "\n");
}

std::vector<MetricRecord> read_metrics_csv(const fs::path& path) {
  const std::string body = text::read_file(path);
  std::vector<MetricRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string::npos) end = body.size();
    const auto line = text::trim(std::string_view(body).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kMetricsHeader) throw ParseError(fmt::format("{}: unexpected metrics header", path.string()));
      continue;
    }
    const auto cells = text::split(line);
    if (cells.size() != 8) throw ParseError(fmt::format("{}:{}: expected 8 columns", path.string(), line_no));
    MetricRecord r;
    r.participant_id = cells[0];
    r.task = task_from_string(cells[1]);
    const auto rep = text::parse_double(cells[2]);
    const auto value = text::parse_double(cells[6]);
    if (!rep || !value) throw ParseError(fmt::format("{}:{}: non-numeric field", path.string(), line_no));
    r.rep_index = static_cast<int>(*rep);
    r.device = device_from_string(cells[3]);
    r.ptm_method = cells[4];
    r.metric = cells[5];
    r.value = *value;
    r.unit = cells[7];
    out.push_back(std::move(r));
  }
  return out;
}

AnalyzeResult cmd_analyze(const RunConfig& config) {
  AnalyzeResult result;
  const std::size_t n = config.manifests.size();
  result.sessions.resize(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      SessionResult& res = result.sessions[i];
      try {
        const Session s = load_session(config.manifests[i]);
        res = analyze_session(s, config);
      } catch (const std::exception& e) {
        res = SessionResult{};
        res.ok = false;
        try {
          const auto m = parse_manifest(config.manifests[i]);
          res.participant_id = m.participant_id;
          res.task = m.task;
        } catch (const std::exception&) {
          res.participant_id = config.manifests[i].string();
        }
        res.diagnostics.push_back(fmt::format("session skipped: {}", e.what()));
        res.discards.push_back({res.participant_id, res.task, -1, Device::mmc, e.what()});
      }
    }
  };
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& s : result.sessions) {
    if (!s.ok) ++result.failed_sessions;
  }

  // One directory per task, in task order.
  std::map<TaskCode, std::vector<const SessionResult*>> by_task;
  for (const auto& s : result.sessions) by_task[s.task].push_back(&s);
  const bool csv = std::find(config.formats.begin(), config.formats.end(), "csv") != config.formats.end();
  const bool js = std::find(config.formats.begin(), config.formats.end(), "json") != config.formats.end();
  for (const auto& [task, sessions] : by_task) {
    const fs::path dir = config.out_dir / std::string(to_string(task));
    fs::create_directories(dir);
    std::vector<MetricRecord> records;
    std::vector<Discard> discards;
    std::string diag;
    for (const auto* s : sessions) {
      records.insert(records.end(), s->records.begin(), s->records.end());
      discards.insert(discards.end(), s->discards.begin(), s->discards.end());
      for (const auto& d : s->diagnostics) diag += fmt::format("{}: {}\n", s->participant_id, d);
    }
    if (csv || !js) write_metrics_csv(records, dir / "metrics.csv");
    if (js) write_metrics_json(records, dir / "metrics.json");
    write_discards_csv(discards, dir / "discards.csv");
    text::write_file_atomic(dir / "diagnostics.txt", diag);
  }
  return result;
}

}  // namespace mmc
