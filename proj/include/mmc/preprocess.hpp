// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmc/keypoints.hpp"
#include "mmc/mocap_io.hpp"
#include "mmc/signal.hpp"

namespace mmc {

struct SegmentationConfig {
  double t1_s{1.0};
  double t2_s{1.0};
  int expected_reps{3};
  double min_peak_separation_s{1.0};
  double min_prominence_frac{0.25};

  void validate() const;  // throws ValidationError
};

// One repetition window cut around a maximum.
struct Segment {
  Signal values;
  std::size_t source_index{0};  // maximum, in the parent signal
  std::size_t start_index{0};   // first sample, in the parent signal
  double t1_s{0.0};
  double t2_s{0.0};
  Device device{Device::mmc};
  int rep_index{0};

  // Position of the source maximum inside the segment.
  std::size_t peak_offset() const { return source_index - start_index; }
};

struct SegmentationResult {
  std::vector<Segment> segments;
  std::vector<std::string> diagnostics;  // one entry per dropped repetition
  std::vector<int> dropped_reps;
};

// Savitzky-Golay smoothing. Interior samples use the symmetric window; the
// first and last window/2 samples are fitted on the truncated window.
Signal smooth(const Signal& signal, std::size_t window_frames, int poly_order = 2);

// Least-squares weights for evaluating a polynomial of `poly_order` fitted to
// samples at integer offsets [-left, right] at offset 0.
std::vector<double> savgol_weights(std::size_t left, std::size_t right, int poly_order);

// Default smoothing window (frames) for a capture rate: 11 at 30 Hz, 31 at
// 100 Hz, roughly a third of a second otherwise.
std::size_t default_savgol_window(double fps);

struct Peak {
  std::size_t index{0};
  double prominence{0.0};
};

// Local maxima (flat tops resolve to their middle sample) with topographic
// prominence. Peaks closer than `min_distance` samples are thinned, keeping
// the more prominent one. Result is in temporal order.
std::vector<Peak> find_peaks(std::span<const double> values, double min_prominence,
                             double min_distance);

// Throws QualityError when fewer than config.expected_reps maxima survive.
std::vector<std::size_t> find_rep_maxima(const Signal& signal, const SegmentationConfig& config);

SegmentationResult segment_reps(const Signal& signal, std::span<const std::size_t> maxima,
                                const SegmentationConfig& config, Device device = Device::mmc);

// Windows given explicitly in seconds; the segment's source_index is the
// window maximum.
SegmentationResult segment_manual(const Signal& signal, std::span<const ManualSegment> windows,
                                  Device device = Device::mmc);

// Spectral (FFT) resampling to exactly `target_len` samples. The output rate
// is scaled so the duration is preserved.
Signal resample_to(const Signal& signal, std::size_t target_len);
Segment resample_to(const Segment& segment, std::size_t target_len);

struct LimbSwapConfig {
  double displacement_factor{5.0};
  std::size_t median_window{31};
  double min_median_px{2.0};
  double crossing_confidence{0.5};
  double max_anomaly_s{1.0};
};

// Frames suspected of carrying swapped or mis-tracked ankle identities.
std::vector<std::size_t> detect_limb_swaps(const KeypointSeries& series, Side side,
                                           const LimbSwapConfig& config = {});

// Fraction of frames in [first, last] that appear in `flagged`.
double flagged_fraction(std::span<const std::size_t> flagged, FrameRange range);

// Keypoints with confidence below `threshold` are replaced by temporal linear
// interpolation of the same keypoint. A keypoint that never reaches the
// threshold is marked unusable.
KeypointSeries mask_low_confidence(const KeypointSeries& series, double threshold = 0.3);

}  // namespace mmc
