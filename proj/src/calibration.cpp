// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/calibration.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "mmc/errors.hpp"

namespace mmc {

std::string_view to_string(PtmMethod m) {
  switch (m) {
    case PtmMethod::gravity: return "gravity";
    case PtmMethod::height: return "height";
    case PtmMethod::object: return "object";
  }
  return "?";
}

PtmMethod ptm_method_from_string(std::string_view s) {
  if (s == "gravity" || s == "g") return PtmMethod::gravity;
  if (s == "height" || s == "h") return PtmMethod::height;
  if (s == "object" || s == "b") return PtmMethod::object;
  throw ValidationError(fmt::format("unknown PTM method '{}'", s));
}

double ptm_gravity_single_ratio(double fall_px, double t_s) {
  if (!(fall_px > 0.0) || !(t_s > 0.0)) throw CalibrationError("fall distance and time must be positive");
  return free_fall_distance_m(t_s) / fall_px;
}

GravityFit fit_free_fall(const Signal& s, const GravityOptions& options) {
  const auto& y = s.values;
  const std::size_t n = y.size();
  if (n < 3) throw CalibrationError("signal too short for a gravity fit");

  GravityFit fit;
  fit.apex_index = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  if (fit.apex_index == 0 || fit.apex_index + 1 >= n) throw CalibrationError("no flight apex in COM signal");

  // Landing impact: largest upward acceleration after the apex.
  double best = -std::numeric_limits<double>::infinity();
  std::size_t landing = 0;
  for (std::size_t k = fit.apex_index + 1; k + 1 < n; ++k) {
    const double dd = y[k + 1] - 2.0 * y[k] + y[k - 1];
    if (dd > best) {
      best = dd;
      landing = k;
    }
  }
  if (landing == 0) throw CalibrationError("no landing after the flight apex");
  fit.landing_index = landing;
  if (landing < fit.apex_index + options.landing_margin + options.min_window - 1) {
    throw CalibrationError(fmt::format("descent window shorter than {} frames", options.min_window));
  }
  fit.fall_window = {fit.apex_index, landing - options.landing_margin};
  // The ascent mirrors the descent, so the fit also uses the frames before the apex.
  const std::size_t half = fit.fall_window.last - fit.apex_index;
  fit.fit_window = {fit.apex_index >= half ? fit.apex_index - half : 0, fit.fall_window.last};
  const std::size_t m = fit.fit_window.length();

  // y(t) = c0 + c1 t + c2 t^2. The free terms absorb the sub-frame offset of
  // the true apex, where d0 = v0 = 0 holds.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    const double t = static_cast<double>(k) / s.fps;
    const auto r = static_cast<Eigen::Index>(k);
    a(r, 0) = 1.0;
    a(r, 1) = t;
    a(r, 2) = t * t;
    b(r) = y[fit.fit_window.first + k];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
  const Eigen::VectorXd resid = b - a * c;
  const double fall_px = b.maxCoeff() - b.minCoeff();
  if (!(fall_px > 0.0)) throw CalibrationError("no descent after the apex");
  fit.residual = std::sqrt(resid.squaredNorm() / static_cast<double>(m)) / fall_px;

  if (options.mode == GravityMode::fit) {
    fit.quadratic_coeff = -c(2);
  } else {
    const double t = static_cast<double>(fit.fall_window.length() - 1) / s.fps;
    fit.quadratic_coeff = (y[fit.fall_window.first] - y[fit.fall_window.last]) / (t * t);
  }
  if (!(fit.quadratic_coeff > 0.0)) throw CalibrationError("descent is not accelerating downward");
  return fit;
}

PtmScale ptm_from_gravity(const Signal& com_signal_px, const GravityOptions& options) {
  if (com_signal_px.unit != Unit::px) throw UnitError("gravity calibration expects a pixel signal");
  const auto fit = fit_free_fall(com_signal_px, options);
  if (fit.residual > options.max_residual) {
    throw CalibrationError(fmt::format("free-fall fit residual {:.3f} exceeds {:.3f}", fit.residual, options.max_residual));
  }
  return {(fit.g / 2.0) / fit.quadratic_coeff, PtmMethod::gravity, fit.residual};
}

namespace {

// Mean y of the usable keypoints of a left/right pair, per frame.
std::vector<double> pair_y(const KeypointSeries& series, Body25 left, Body25 right, std::size_t frames,
                           const char* what) {
  const bool l = series.usable[idx(left)];
  const bool r = series.usable[idx(right)];
  if (!l && !r) throw CalibrationError(fmt::format("{} keypoints unusable", what));
  std::vector<double> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto& f = series.frames[t];
    if (l && r) {
      out[t] = (f[idx(left)].y + f[idx(right)].y) / 2.0;
    } else {
      out[t] = l ? f[idx(left)].y : f[idx(right)].y;
    }
  }
  return out;
}

}  // namespace

PtmScale ptm_from_height(const KeypointSeries& series, double height_m, double rest_s) {
  if (!(height_m > 0.0) || !std::isfinite(height_m)) throw ValidationError("height_m must be positive");
  if (series.frames.empty()) throw CalibrationError("empty keypoint series");
  const auto rest = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(rest_s * series.fps)), 1,
                                            series.size());
  const auto shoulder = pair_y(series, Body25::LShoulder, Body25::RShoulder, rest, "shoulder");
  const auto toe = pair_y(series, Body25::LBigToe, Body25::RBigToe, rest, "toe");
  std::vector<double> dist(rest);
  for (std::size_t t = 0; t < rest; ++t) dist[t] = std::abs(toe[t] - shoulder[t]);
  std::sort(dist.begin(), dist.end());
  const double med = rest % 2 == 1 ? dist[rest / 2] : (dist[rest / 2 - 1] + dist[rest / 2]) / 2.0;
  if (!(med > 0.0)) throw CalibrationError("shoulder-to-toe distance is zero");
  return {height_m / full_height_from_shoulder_to_toe(med), PtmMethod::height, 0.0};
}

PtmScale ptm_from_object(double object_len_px, double object_len_m) {
  if (!(object_len_px > 0.0) || !(object_len_m > 0.0) || !std::isfinite(object_len_px) ||
      !std::isfinite(object_len_m)) {
    throw ValidationError("object lengths must be positive");
  }
  return {object_len_m / object_len_px, PtmMethod::object, 0.0};
}

Signal apply_scale(const Signal& signal_px, const PtmScale& ptm) {
  if (signal_px.unit != Unit::px) {
    throw UnitError(fmt::format("apply_scale expects a px signal, got {}", to_string(signal_px.unit)));
  }
  if (!(ptm.metres_per_pixel > 0.0) || !std::isfinite(ptm.metres_per_pixel)) {
    throw ValidationError("metres_per_pixel must be positive");
  }
  Signal out{signal_px.values, signal_px.fps, Unit::m};
  for (auto& v : out.values) v *= ptm.metres_per_pixel;
  return out;
}

}  // namespace mmc
