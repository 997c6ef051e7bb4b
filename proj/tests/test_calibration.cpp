#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmc/calibration.hpp"
#include "mmc/errors.hpp"
#include "mmc/kinemetrics.hpp"
#include "mmc/synth.hpp"

using namespace mmc;

namespace {

// Upward-positive COM pixel trajectory: standing, ballistic flight of
// `flight_s`, then standing again. The apex sits off the frame grid.
Signal ballistic_px(double ptm, double fps, double flight_s, double phase = 0.37) {
  const double v0 = kGravity * flight_s / 2.0;
  const double t0 = 0.5 + phase / fps;
  std::vector<double> y;
  const auto n = static_cast<std::size_t>(std::lround((1.0 + flight_s + 0.5) * fps));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fps - t0;
    const double z = (t > 0.0 && t < flight_s) ? v0 * t - kGravity * t * t / 2.0 : 0.0;
    y.push_back(400.0 + z / ptm);
  }
  return Signal{y, fps, Unit::px};
}

}  // namespace

TEST_CASE("noiseless free fall recovers the programmed scale") {
  for (double fps : {30.0, 60.0, 100.0}) {
    const auto ptm = ptm_from_gravity(ballistic_px(0.002, fps, 0.6));
    CHECK(ptm.method == PtmMethod::gravity);
    CHECK(std::abs(ptm.metres_per_pixel / 0.002 - 1.0) < 0.005);
    CHECK(ptm.fit_residual < 0.1);
  }
}

TEST_CASE("single-ratio substitution") {
  CHECK(free_fall_distance_m(0.1) == doctest::Approx(0.0490).epsilon(1e-3));
  CHECK(ptm_gravity_single_ratio(49.0, 0.1) == doctest::Approx(0.0010).epsilon(1e-3));
  GravityOptions opt;
  opt.mode = GravityMode::single_ratio;
  const auto ptm = ptm_from_gravity(ballistic_px(0.002, 100.0, 0.6, 0.0), opt);
  CHECK(std::abs(ptm.metres_per_pixel / 0.002 - 1.0) < 0.01);
}

TEST_CASE("rising signal without apex is a calibration error") {
  std::vector<double> y(60);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
  CHECK_THROWS_AS(ptm_from_gravity(Signal{y, 30.0, Unit::px}), CalibrationError);
}

TEST_CASE("gravity scale is inversely proportional to pixel scale") {
  const auto base = ballistic_px(0.002, 30.0, 0.55);
  const double p0 = ptm_from_gravity(base).metres_per_pixel;
  for (double k : {0.5, 2.0, 3.7}) {
    auto scaled = base;
    for (auto& v : scaled.values) v *= k;
    const double pk = ptm_from_gravity(scaled).metres_per_pixel;
    CHECK(pk * k == doctest::Approx(p0).epsilon(1e-12));
  }
}

TEST_CASE("gravity fit tolerates 1 px noise") {
  GaussianSource rng(77);
  int within = 0;
  constexpr int kTrials = 50;
  for (int trial = 0; trial < kTrials; ++trial) {
    auto s = ballistic_px(0.002, 30.0, 0.6, rng.uniform());
    for (auto& v : s.values) v += rng();
    if (std::abs(ptm_from_gravity(s).metres_per_pixel / 0.002 - 1.0) < 0.05) ++within;
  }
  CHECK(within == kTrials);
}

TEST_CASE("height scale from shoulder-to-toe distance") {
  CHECK(full_height_from_shoulder_to_toe(675.0) == doctest::Approx(900.0));

  KeypointSeries s;
  s.fps = 30.0;
  for (int t = 0; t < 30; ++t) {
    Frame f{};
    for (auto& kp : f) kp = {500.0, 500.0, 0.9};
    f[idx(Body25::LShoulder)].y = f[idx(Body25::RShoulder)].y = 200.0;
    f[idx(Body25::LBigToe)].y = f[idx(Body25::RBigToe)].y = 875.0;
    s.frames.push_back(f);
  }
  const auto ptm = ptm_from_height(s, 1.80);
  CHECK(ptm.method == PtmMethod::height);
  CHECK(ptm.metres_per_pixel == doctest::Approx(0.0020).epsilon(1e-12));
  CHECK_THROWS_AS(ptm_from_height(s, 0.0), ValidationError);

  auto dead = s;
  dead.usable[idx(Body25::LBigToe)] = false;
  dead.usable[idx(Body25::RBigToe)] = false;
  CHECK_THROWS(ptm_from_height(dead, 1.80));
}

TEST_CASE("height scale is exact on a synthetic standing pose") {
  SynthParams p;
  p.kind = SynthKind::cmj;
  p.ptm_true = 0.0023;
  p.stature_m = 1.81;
  const auto out = generate(p);
  const auto ptm = ptm_from_height(out.mmc, p.stature_m);
  CHECK(ptm.metres_per_pixel == doctest::Approx(0.0023).epsilon(1e-9));
}

TEST_CASE("object scale") {
  CHECK(ptm_from_object(450.0, kBarbellLengthM).metres_per_pixel == doctest::Approx(0.0025));
  CHECK(ptm_from_object(3.0, 3.0).metres_per_pixel == 1.0);
  CHECK_THROWS_AS(ptm_from_object(0.0, kBarbellLengthM), ValidationError);
  CHECK_THROWS_AS(ptm_from_object(10.0, -1.0), ValidationError);
}

TEST_CASE("apply_scale") {
  const PtmScale ptm{0.002, PtmMethod::object, 0.0};
  const auto m = apply_scale(Signal{{0.0, 100.0, 200.0}, 30.0, Unit::px}, ptm);
  CHECK(m.unit == Unit::m);
  CHECK(m.values[1] == doctest::Approx(0.2));
  CHECK(m.values[2] == doctest::Approx(0.4));
  const auto zero = apply_scale(Signal{{0.0, 0.0}, 30.0, Unit::px}, ptm);
  CHECK(zero.values == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(apply_scale(m, ptm), UnitError);
}

TEST_CASE("jump height commutes with every scale method") {
  const auto s = ballistic_px(0.002, 30.0, 0.5);
  const double h_px = rise_above_rest(s);
  const PtmScale scales[] = {ptm_from_gravity(s), ptm_from_object(500.0, kBarbellLengthM),
                             PtmScale{0.0031, PtmMethod::height, 0.0}};
  for (const auto& ptm : scales) {
    CHECK(jump_height(apply_scale(s, ptm)).height_m == doctest::Approx(ptm.metres_per_pixel * h_px).epsilon(1e-12));
  }
}
