// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numeric>

#include <Eigen/Dense>
#include <fftw3.h>
#include <fmt/format.h>

#include "mmc/errors.hpp"

namespace mmc {

void SegmentationConfig::validate() const {
  if (!(t1_s >= 0.0) || !(t2_s >= 0.0)) throw ValidationError("t1_s and t2_s must be non-negative");
  if (expected_reps < 1) throw ValidationError("expected_reps must be at least 1");
  if (!(min_prominence_frac > 0.0 && min_prominence_frac <= 1.0)) {
    throw ValidationError("min_prominence_frac must be in (0, 1]");
  }
  if (!(min_peak_separation_s >= 0.0)) throw ValidationError("min_peak_separation_s must be non-negative");
}

// ---------------------------------------------------------------------------
// Savitzky-Golay

std::vector<double> savgol_weights(std::size_t left, std::size_t right, int poly_order) {
  const std::size_t n = left + right + 1;
  const auto order = static_cast<std::size_t>(std::max(poly_order, 0));
  const std::size_t cols = std::min(order, n - 1) + 1;
  // Offsets are scaled to [-1, 1] to keep the Vandermonde matrix well
  // conditioned; the constant term is unaffected.
  const double scale = static_cast<double>(std::max<std::size_t>({left, right, 1}));
  Eigen::MatrixXd a(n, cols);
  for (std::size_t r = 0; r < n; ++r) {
    const double t = (static_cast<double>(r) - static_cast<double>(left)) / scale;
    double p = 1.0;
    for (std::size_t c = 0; c < cols; ++c) {
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = p;
      p *= t;
    }
  }
  const Eigen::MatrixXd pinv =
      a.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = pinv(0, static_cast<Eigen::Index>(j));
  return w;
}

std::size_t default_savgol_window(double fps) {
  if (std::abs(fps - 30.0) < 1e-9) return 11;
  if (std::abs(fps - 100.0) < 1e-9) return 31;
  auto w = static_cast<std::size_t>(std::lround(fps / 3.0));
  if (w % 2 == 0) ++w;
  return std::max<std::size_t>(w, 5);
}

Signal smooth(const Signal& signal, std::size_t window_frames, int poly_order) {
  if (window_frames % 2 == 0) throw ValidationError(fmt::format("savgol window {} must be odd", window_frames));
  if (poly_order < 0 || window_frames <= static_cast<std::size_t>(poly_order)) {
    throw ValidationError(fmt::format("savgol window {} must exceed polynomial order {}", window_frames, poly_order));
  }
  const std::size_t n = signal.size();
  if (window_frames > n) {
    throw ValidationError(fmt::format("savgol window {} longer than signal ({} samples)", window_frames, n));
  }
  const std::size_t half = window_frames / 2;
  Signal out = signal;
  const auto& x = signal.values;

  const auto centre = savgol_weights(half, half, poly_order);
  for (std::size_t i = half; i + half < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < window_frames; ++j) acc += centre[j] * x[i - half + j];
    out.values[i] = acc;
  }
  // Truncated windows at the edges.
  for (std::size_t i = 0; i < std::min(half, n); ++i) {
    const std::size_t right = std::min(half, n - 1 - i);
    const auto w = savgol_weights(i, right, poly_order);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * x[j];
    out.values[i] = acc;
  }
  for (std::size_t i = std::max(n - half, half); i < n; ++i) {
    const std::size_t right = n - 1 - i;
    const auto w = savgol_weights(half, right, poly_order);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * x[i - half + j];
    out.values[i] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Peaks and segmentation

std::vector<Peak> find_peaks(std::span<const double> x, double min_prominence, double min_distance) {
  const std::size_t n = x.size();
  std::vector<Peak> peaks;
  if (n < 3) return peaks;

  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back({(i + ahead - 1) / 2, 0.0});
        i = ahead;
        continue;
      }
    }
    ++i;
  }

  for (auto& p : peaks) {
    const double h = x[p.index];
    double left_min = h;
    for (std::size_t k = p.index + 1; k-- > 0;) {
      if (x[k] > h) break;
      left_min = std::min(left_min, x[k]);
    }
    double right_min = h;
    for (std::size_t k = p.index; k < n; ++k) {
      if (x[k] > h) break;
      right_min = std::min(right_min, x[k]);
    }
    p.prominence = h - std::max(left_min, right_min);
  }
  std::erase_if(peaks, [&](const Peak& p) { return p.prominence < min_prominence; });

  if (min_distance > 0.0 && peaks.size() > 1) {
    std::vector<std::size_t> order(peaks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (peaks[a].prominence != peaks[b].prominence) return peaks[a].prominence > peaks[b].prominence;
      return x[peaks[a].index] > x[peaks[b].index];
    });
    std::vector<bool> keep(peaks.size(), true);
    for (auto a : order) {
      if (!keep[a]) continue;
      for (std::size_t b = 0; b < peaks.size(); ++b) {
        if (b == a || !keep[b]) continue;
        const double d = std::abs(static_cast<double>(peaks[a].index) - static_cast<double>(peaks[b].index));
        if (d < min_distance) keep[b] = false;
      }
    }
    std::vector<Peak> kept;
    for (std::size_t k = 0; k < peaks.size(); ++k) {
      if (keep[k]) kept.push_back(peaks[k]);
    }
    peaks = std::move(kept);
  }
  return peaks;
}

std::vector<std::size_t> find_rep_maxima(const Signal& signal, const SegmentationConfig& config) {
  config.validate();
  std::vector<Peak> peaks;
  if (!signal.empty()) {
    const auto [lo, hi] = std::minmax_element(signal.values.begin(), signal.values.end());
    const double range = *hi - *lo;
    if (range > 0.0) {
      peaks = find_peaks(signal.values, config.min_prominence_frac * range,
                         config.min_peak_separation_s * signal.fps);
    }
  }
  const auto expected = static_cast<std::size_t>(config.expected_reps);
  if (peaks.size() < expected) {
    throw QualityError(fmt::format("found {} repetition maxima, expected {}", peaks.size(), expected));
  }
  if (peaks.size() > expected) {
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& a, const Peak& b) { return a.prominence > b.prominence; });
    peaks.resize(expected);
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.index < b.index; });
  }
  std::vector<std::size_t> out;
  for (const auto& p : peaks) out.push_back(p.index);
  return out;
}

namespace {

Segment slice(const Signal& signal, std::size_t start, std::size_t end, std::size_t source, Device device,
              int rep) {
  Segment seg;
  seg.values.fps = signal.fps;
  seg.values.unit = signal.unit;
  seg.values.values.assign(signal.values.begin() + static_cast<std::ptrdiff_t>(start),
                           signal.values.begin() + static_cast<std::ptrdiff_t>(end) + 1);
  seg.source_index = source;
  seg.start_index = start;
  seg.t1_s = static_cast<double>(source - start) / signal.fps;
  seg.t2_s = static_cast<double>(end - source) / signal.fps;
  seg.device = device;
  seg.rep_index = rep;
  return seg;
}

}  // namespace

SegmentationResult segment_reps(const Signal& signal, std::span<const std::size_t> maxima,
                                const SegmentationConfig& config, Device device) {
  config.validate();
  SegmentationResult res;
  const auto before = std::llround(signal.fps * config.t1_s);
  const auto after = std::llround(signal.fps * config.t2_s);
  const auto last = static_cast<long long>(signal.size()) - 1;
  for (std::size_t k = 0; k < maxima.size(); ++k) {
    const auto x = static_cast<long long>(maxima[k]);
    const long long start = x - before;
    const long long end = x + after;
    const int rep = static_cast<int>(k);
    if (start < 0 || end > last) {
      res.diagnostics.push_back(fmt::format("repetition {}: window [{}, {}] exceeds signal bounds [0, {}]", rep + 1,
                                            start, end, last));
      res.dropped_reps.push_back(rep);
      continue;
    }
    auto seg = slice(signal, static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                     static_cast<std::size_t>(x), device, rep);
    seg.t1_s = config.t1_s;
    seg.t2_s = config.t2_s;
    res.segments.push_back(std::move(seg));
  }
  return res;
}

SegmentationResult segment_manual(const Signal& signal, std::span<const ManualSegment> windows, Device device) {
  SegmentationResult res;
  const auto last = static_cast<long long>(signal.size()) - 1;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const int rep = static_cast<int>(k);
    const long long start = std::llround(windows[k].start_s * signal.fps);
    const long long end = std::llround(windows[k].end_s * signal.fps);
    if (start < 0 || end > last || end <= start) {
      res.diagnostics.push_back(fmt::format("repetition {}: manual window [{}, {}] s outside recording", rep + 1,
                                            windows[k].start_s, windows[k].end_s));
      res.dropped_reps.push_back(rep);
      continue;
    }
    const auto first = signal.values.begin() + start;
    const auto src = static_cast<std::size_t>(std::max_element(first, signal.values.begin() + end + 1) -
                                              signal.values.begin());
    res.segments.push_back(
        slice(signal, static_cast<std::size_t>(start), static_cast<std::size_t>(end), src, device, rep));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

// FFTW planning is not thread-safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

struct FftwPlan {
  explicit FftwPlan(fftw_plan p) : plan(p) {}
  ~FftwPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  fftw_plan plan;
};

std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
  const auto n = static_cast<int>(x.size());
  const std::size_t bins = x.size() / 2 + 1;
  FftwBuffer in(sizeof(double) * x.size());
  FftwBuffer out(sizeof(fftw_complex) * bins);
  auto* in_d = static_cast<double*>(in.ptr);
  auto* out_c = static_cast<fftw_complex*>(out.ptr);
  fftw_plan raw;
  {
    std::lock_guard lock(fftw_planner_mutex());
    raw = fftw_plan_dft_r2c_1d(n, in_d, out_c, FFTW_ESTIMATE);
  }
  FftwPlan plan(raw);
  std::copy(x.begin(), x.end(), in_d);
  fftw_execute(plan.plan);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t k = 0; k < bins; ++k) spec[k] = {out_c[k][0], out_c[k][1]};
  return spec;
}

// Unnormalized inverse of a half spectrum to `n` real samples.
std::vector<double> irfft(const std::vector<std::complex<double>>& spec, std::size_t n) {
  FftwBuffer in(sizeof(fftw_complex) * spec.size());
  FftwBuffer out(sizeof(double) * n);
  auto* in_c = static_cast<fftw_complex*>(in.ptr);
  auto* out_d = static_cast<double*>(out.ptr);
  fftw_plan raw;
  {
    std::lock_guard lock(fftw_planner_mutex());
    raw = fftw_plan_dft_c2r_1d(static_cast<int>(n), in_c, out_d, FFTW_ESTIMATE);
  }
  FftwPlan plan(raw);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    in_c[k][0] = spec[k].real();
    in_c[k][1] = spec[k].imag();
  }
  fftw_execute(plan.plan);
  return std::vector<double>(out_d, out_d + n);
}

}  // namespace

Signal resample_to(const Signal& signal, std::size_t target_len) {
  if (target_len < 2) throw ValidationError(fmt::format("resample target length {} < 2", target_len));
  const std::size_t n_in = signal.size();
  if (n_in == 0) throw ValidationError("cannot resample an empty signal");
  Signal out{{}, signal.fps * static_cast<double>(target_len) / static_cast<double>(n_in), signal.unit};
  if (n_in == target_len) {
    out.values = signal.values;
    return out;
  }
  // A constant has only a DC term; skip the transform so it stays exact.
  if (std::all_of(signal.values.begin(), signal.values.end(), [&](double v) { return v == signal.values[0]; })) {
    out.values.assign(target_len, signal.values[0]);
    return out;
  }

  const auto x = rfft(signal.values);
  std::vector<std::complex<double>> y(target_len / 2 + 1);
  const std::size_t n = std::min(n_in, target_len);
  const std::size_t nyq = n / 2 + 1;
  for (std::size_t k = 0; k < nyq; ++k) y[k] = x[k];
  if (n % 2 == 0) {
    // The +-n/2 bins are shared between positive and negative frequencies.
    if (target_len < n_in) {
      y[n / 2] *= 2.0;
    } else {
      y[n / 2] *= 0.5;
    }
  }
  out.values = irfft(y, target_len);
  const double norm = 1.0 / static_cast<double>(n_in);
  for (auto& v : out.values) v *= norm;
  return out;
}

Segment resample_to(const Segment& segment, std::size_t target_len) {
  Segment out = segment;
  out.values = resample_to(segment.values, target_len);
  return out;
}

// ---------------------------------------------------------------------------
// Quality

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = (m + *std::max_element(v.begin(), mid)) / 2.0;
  return m;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::vector<std::size_t> detect_limb_swaps(const KeypointSeries& series, Side side, const LimbSwapConfig& config) {
  const std::size_t n = series.size();
  std::vector<bool> flag(n, false);
  if (n < 2) return {};

  // Displacement rule on the tracked ankle.
  const auto tracked = idx(ankle_of(side));
  std::vector<double> step(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) step[t] = std::abs(series.frames[t][tracked].x - series.frames[t - 1][tracked].x);
  const std::size_t half = config.median_window / 2;
  std::vector<std::size_t> jumps;
  for (std::size_t t = 1; t < n; ++t) {
    const std::size_t lo = t > half ? t - half : 1;
    const std::size_t hi = std::min(n - 1, t + half);
    std::vector<double> win(step.begin() + static_cast<std::ptrdiff_t>(lo), step.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    const double ref = std::max(median_of(std::move(win)), config.min_median_px);
    if (step[t] > config.displacement_factor * ref) jumps.push_back(t);
  }
  // A jump followed by a return jump brackets the frames in between.
  const auto max_gap = static_cast<std::size_t>(std::lround(config.max_anomaly_s * series.fps));
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    if (k + 1 < jumps.size() && jumps[k + 1] - jumps[k] <= max_gap) {
      for (std::size_t t = jumps[k]; t < jumps[k + 1]; ++t) flag[t] = true;
      ++k;
    } else {
      flag[jumps[k]] = true;
    }
  }

  // Identity rule: left/right ankle order opposite to the series' reference
  // order while both detections are weak.
  const auto li = idx(Body25::LAnkle);
  const auto ri = idx(Body25::RAnkle);
  std::vector<double> confident;
  std::vector<double> all;
  for (const auto& f : series.frames) {
    const double d = f[li].x - f[ri].x;
    all.push_back(d);
    if (f[li].confidence >= config.crossing_confidence && f[ri].confidence >= config.crossing_confidence) {
      confident.push_back(d);
    }
  }
  const int ref = sign_of(median_of(confident.empty() ? all : confident));
  if (ref != 0) {
    for (std::size_t t = 0; t < n; ++t) {
      const auto& f = series.frames[t];
      if (f[li].confidence < config.crossing_confidence && f[ri].confidence < config.crossing_confidence &&
          sign_of(f[li].x - f[ri].x) == -ref) {
        flag[t] = true;
      }
    }
  }

  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < n; ++t) {
    if (flag[t]) out.push_back(t);
  }
  return out;
}

double flagged_fraction(std::span<const std::size_t> flagged, FrameRange range) {
  if (range.last < range.first) return 0.0;
  const auto lo = std::lower_bound(flagged.begin(), flagged.end(), range.first);
  const auto hi = std::upper_bound(flagged.begin(), flagged.end(), range.last);
  return static_cast<double>(hi - lo) / static_cast<double>(range.length());
}

KeypointSeries mask_low_confidence(const KeypointSeries& series, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("confidence threshold must be in [0, 1]");
  KeypointSeries out = series;
  const std::size_t n = series.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < kBody25Count; ++k) {
    std::vector<double> xs(n), ys(n);
    bool any = false;
    bool all = true;
    for (std::size_t t = 0; t < n; ++t) {
      const auto& kp = series.frames[t][k];
      if (kp.confidence >= threshold) {
        xs[t] = kp.x;
        ys[t] = kp.y;
        any = true;
      } else {
        xs[t] = ys[t] = nan;
        all = false;
      }
    }
    if (!any) {
      out.usable[k] = false;
      continue;
    }
    if (all) continue;
    fill_gaps(xs);
    fill_gaps(ys);
    for (std::size_t t = 0; t < n; ++t) {
      out.frames[t][k].x = xs[t];
      out.frames[t][k].y = ys[t];
    }
  }
  return out;
}

}  // namespace mmc
