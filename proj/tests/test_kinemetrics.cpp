#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mmc/calibration.hpp"
#include "mmc/errors.hpp"
#include "mmc/kinemetrics.hpp"
#include "mmc/preprocess.hpp"
#include "mmc/synth.hpp"

using namespace mmc;

namespace {

constexpr double kPi = std::numbers::pi;

Signal metres(std::vector<double> v, double fps) { return Signal{std::move(v), fps, Unit::m}; }

Signal degrees(std::vector<double> v, double fps) { return Signal{std::move(v), fps, Unit::deg}; }

double deg(double rad) { return rad * 180.0 / kPi; }

// Vertical toe of the dominant foot in metres, upward positive.
Signal toe_m(const SynthOutput& out, const SynthParams& p) {
  const auto px = out.mmc.vertical_px(big_toe_of(p.dominant_side));
  return apply_scale(px, PtmScale{p.ptm_true, PtmMethod::object, 0.0});
}

// Vector at `angle` radians from the x axis with the given length.
Vec2 polar(double angle, double len) { return {len * std::cos(angle), len * std::sin(angle)}; }

}  // namespace

TEST_CASE("jump_height subtracts the rest level") {
  std::vector<double> v(30, 0.0);
  v.insert(v.end(), {0.1, 0.2, 0.31, 0.2, 0.1, 0.0});
  CHECK(jump_height(metres(v, 30.0)).height_m == doctest::Approx(0.31));
  CHECK_THROWS_AS(jump_height(metres(std::vector<double>(60, 0.4), 30.0)), QualityError);
}

TEST_CASE("jump_height rejects a maximum inside the rest window") {
  std::vector<double> v(60, 0.0);
  v[2] = 1.0;
  CHECK_THROWS_AS(jump_height(metres(v, 30.0)), QualityError);
}

TEST_CASE("jump_height is translation invariant and scales linearly") {
  GaussianSource rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(90);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double t = static_cast<double>(i) / 30.0;
      v[i] = 0.01 * rng() + (t > 1.0 && t < 1.6 ? 0.4 * std::sin(kPi * (t - 1.0) / 0.6) : 0.0);
    }
    const double h = jump_height(metres(v, 30.0)).height_m;
    const double c = 5.0 * rng();
    const double k = 0.5 + rng.uniform();
    auto shifted = v, scaled = v;
    for (auto& x : shifted) x += c;
    for (auto& x : scaled) x *= k;
    CHECK(jump_height(metres(shifted, 30.0)).height_m == doctest::Approx(h).epsilon(1e-9));
    CHECK(jump_height(metres(scaled, 30.0)).height_m == doctest::Approx(k * h).epsilon(1e-12));
  }
}

TEST_CASE("ballistic jump height recovered from the synthetic toe") {
  CHECK(ballistic_height(0.5) == doctest::Approx(0.3065).epsilon(1e-3));
  for (double fps : {30.0, 100.0}) {
    SynthParams p;
    p.kind = SynthKind::cmj;
    p.fps = fps;
    p.flight_s = 0.5;
    const auto out = generate(p);
    const double h = jump_height(toe_m(out, p)).height_m;
    CHECK(std::abs(h / ballistic_height(0.5) - 1.0) < (fps == 30.0 ? 0.02 : 0.01));
  }
}

TEST_CASE("concentric_window") {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = static_cast<double>(i);
    v[i] = i <= 40 ? 0.8 - 0.8 * x / 40.0 : (i <= 80 ? (x - 40.0) / 40.0 : 1.0 - (x - 80.0) / 100.0);
  }
  CHECK(concentric_window(metres(v, 100.0)) == FrameRange{40, 80});

  std::vector<double> rising(50);
  for (std::size_t i = 0; i < rising.size(); ++i) rising[i] = static_cast<double>(i);
  CHECK(concentric_window(metres(rising, 100.0)) == FrameRange{0, 49});

  std::vector<double> falling(rising.rbegin(), rising.rend());
  CHECK_THROWS_AS(concentric_window(metres(falling, 100.0)), QualityError);
}

TEST_CASE("refine_concentric_window trims flat ends to the rising run") {
  std::vector<double> v(100, 0.0);
  for (std::size_t i = 30; i < 70; ++i) v[i] = static_cast<double>(i - 30) / 40.0;
  for (std::size_t i = 70; i < 100; ++i) v[i] = 1.0;
  v[5] = -0.001;
  v[95] = 1.001;
  const auto sig = metres(v, 100.0);
  const auto w = concentric_window(sig);
  CHECK(w == FrameRange{5, 95});
  const auto r = refine_concentric_window(sig, w);
  CHECK(r.first >= 29);
  CHECK(r.first <= 31);
  CHECK(r.last >= 69);
  CHECK(r.last <= 71);
}

TEST_CASE("velocity_metrics on a linear rise") {
  std::vector<double> v(101);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) / 100.0;
  const auto vm = velocity_metrics(metres(v, 100.0), {0, 100});
  CHECK(std::abs(vm.peak_mps - 1.0) < 1e-6);
  CHECK(std::abs(vm.mean_mps - 1.0) < 1e-6);
  CHECK_THROWS_AS(velocity_metrics(metres(v, 100.0), {10, 11}), QualityError);
}

TEST_CASE("velocity_metrics on a half-sine lift") {
  constexpr double A = 0.6, T = 1.0, fps = 100.0;
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) {
    const double t = i / fps;
    v.push_back(A * (1.0 - std::cos(kPi * t / T)) / 2.0);
  }
  const auto sig = metres(v, fps);
  const auto vm = velocity_metrics(sig, concentric_window(sig));
  CHECK(std::abs(vm.peak_mps / (A * kPi / (2.0 * T)) - 1.0) < 0.01);
  CHECK(std::abs(vm.mean_mps / (A / T) - 1.0) < 0.01);
}

TEST_CASE("mean velocity error is bounded by one frame of phase") {
  // Sample grid offset from the lift start by a fraction of a frame.
  constexpr double A = 0.5, T = 1.0;
  for (double fps : {30.0, 100.0}) {
    for (double offset : {0.25, 0.5, 0.75}) {
      std::vector<double> v;
      for (int i = -10; i <= static_cast<int>(fps) + 10; ++i) {
        const double t = std::clamp((i + offset) / fps, 0.0, T);
        v.push_back(A * (1.0 - std::cos(kPi * t / T)) / 2.0);
      }
      const auto sig = metres(v, fps);
      const auto vm = velocity_metrics(sig, refine_concentric_window(sig, concentric_window(sig)));
      CHECK(std::abs(vm.mean_mps / (A / T) - 1.0) <= 1.0 / (T * fps) + 1e-3);
    }
  }
}

namespace {

// Hold, constant acceleration, constant velocity, constant deceleration, hold.
// Starts at frame `t0`; each of the three moving stages lasts 30 frames.
std::vector<double> hinge_lift(double t0, std::size_t n, double a) {
  std::vector<double> v(n);
  const double vmax = 30.0 * a;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - t0;
    if (t <= 0.0) {
      v[i] = 0.0;
    } else if (t <= 30.0) {
      v[i] = a * t * t;
    } else if (t <= 60.0) {
      v[i] = 900.0 * a + vmax * (t - 30.0);
    } else if (t <= 90.0) {
      const double u = 90.0 - t;
      v[i] = 3600.0 * a - a * u * u;
    } else {
      v[i] = 3600.0 * a;
    }
  }
  return v;
}

}  // namespace

TEST_CASE("concentric edges recover an off-grid hinge exactly") {
  constexpr double fps = 30.0, a = 0.001;
  const auto sig = metres(hinge_lift(20.35, 140, a), fps);
  const auto w = refine_concentric_window(sig, concentric_window(sig));
  const auto e = concentric_edges(sig, sig, w, 5);
  CHECK(e.start_frame == doctest::Approx(20.35).epsilon(1e-9));
  CHECK(e.end_frame == doctest::Approx(110.35).epsilon(1e-9));
  CHECK(e.low == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(e.high == doctest::Approx(3.6).epsilon(1e-9));
  CHECK(mean_concentric_velocity(sig, sig, w, 5) == doctest::Approx(3.6 * fps / 90.0).epsilon(1e-9));
}

TEST_CASE("mean concentric velocity of a smoothed noisy half-sine") {
  constexpr double A = 0.5, T = 1.0, fps = 30.0;
  GaussianSource rng(17);
  double sum = 0.0, sq = 0.0;
  constexpr int kTrials = 200;
  for (int trial = 0; trial < kTrials; ++trial) {
    const double offset = rng.uniform();
    std::vector<double> v;
    for (int i = -20; i <= static_cast<int>(fps) + 20; ++i) {
      const double t = std::clamp((i + offset) / fps, 0.0, T);
      v.push_back(A * (1.0 - std::cos(kPi * t / T)) / 2.0 + 0.003 * rng());
    }
    const auto raw = metres(v, fps);
    const auto sm = smooth(raw, 11, 2);
    const auto w = refine_concentric_window(sm, concentric_window(sm));
    const double err = mean_concentric_velocity(raw, sm, w, 5) / (A / T) - 1.0;
    sum += err;
    sq += err * err;
  }
  MESSAGE("bias " << sum / kTrials << " rms " << std::sqrt(sq / kTrials));
  CHECK(std::abs(sum / kTrials) < 0.01);
  CHECK(std::sqrt(sq / kTrials) < 0.03);
}

TEST_CASE("mean concentric velocity scales and ignores offsets") {
  const auto base = metres(hinge_lift(12.6, 120, 0.002), 100.0);
  const auto w = refine_concentric_window(base, concentric_window(base));
  const double ref = mean_concentric_velocity(base, base, w, 8);
  auto moved = base;
  for (auto& x : moved.values) x = 2.5 * x - 7.0;
  CHECK(mean_concentric_velocity(moved, moved, w, 8) == doctest::Approx(2.5 * ref).epsilon(1e-9));
  CHECK_THROWS_AS(concentric_edges(base, metres(std::vector<double>(3, 0.0), 100.0), w, 8), ValidationError);
}

TEST_CASE("velocity peak is at least the mean and both scale with PTM") {
  GaussianSource rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(60);
    double acc = 0.0;
    for (auto& x : v) {
      acc += std::abs(rng());
      x = acc;
    }
    const auto sig = metres(v, 30.0);
    const FrameRange w{0, 59};
    const auto vm = velocity_metrics(sig, w);
    CHECK(vm.peak_mps >= vm.mean_mps);
    CHECK(vm.mean_mps >= 0.0);
    const double k = 0.001 + rng.uniform();
    auto scaled = v;
    for (auto& x : scaled) x *= k;
    const auto vk = velocity_metrics(metres(scaled, 30.0), w);
    CHECK(vk.peak_mps == doctest::Approx(k * vm.peak_mps).epsilon(1e-12));
    CHECK(vk.mean_mps == doctest::Approx(k * vm.mean_mps).epsilon(1e-12));
  }
}

TEST_CASE("repeated-jump flight and contact within one frame") {
  SynthParams p;
  p.kind = SynthKind::rjt;
  p.fps = 30.0;
  p.flight_s = 0.40;
  p.contact_s = 0.25;
  p.reps = 4;
  const auto out = generate(p);
  const auto toe = toe_m(out, p);
  const auto hops = flight_contact_rjt(toe);
  REQUIRE(hops.size() == out.truth.reps.size());
  double total = 0.0;
  for (std::size_t k = 0; k < hops.size(); ++k) {
    CHECK(std::abs(hops[k].flight_s - out.truth.reps[k].flight_s) <= 1.0 / 30.0);
    CHECK(std::abs(hops[k].contact_s - out.truth.reps[k].contact_s) <= 1.0 / 30.0);
    CHECK(hops[k].flight_s > 0.0);
    CHECK(hops[k].contact_s > 0.0);
    total += hops[k].flight_s + hops[k].contact_s;
  }
  CHECK(total <= toe.duration_s());
}

TEST_CASE("repeated-jump errors and threshold boundary") {
  CHECK_THROWS_AS(flight_contact_rjt(metres(std::vector<double>(120, 0.0), 30.0)), QualityError);
  // Samples exactly at the threshold count as ground contact, so the two
  // shallow bumps do not form airborne runs.
  std::vector<double> v(120, 0.0);
  for (std::size_t i = 30; i < 40; ++i) v[i] = kAirborneThresholdM;
  for (std::size_t i = 70; i < 80; ++i) v[i] = kAirborneThresholdM;
  CHECK_THROWS_AS(flight_contact_rjt(metres(v, 30.0)), QualityError);
}

TEST_CASE("drop jump timing from toe speed peaks") {
  SynthParams p;
  p.kind = SynthKind::dropjump;
  p.fps = 30.0;
  p.contact_s = 0.30;
  p.flight_s = 0.45;
  p.reps = 2;
  const auto out = generate(p);
  const auto toe = toe_m(out, p);
  const auto segs = segment_manual(toe, out.manual_segments);
  REQUIRE(segs.segments.size() == 2);
  for (const auto& seg : segs.segments) {
    const auto ev = dropjump_events(seg.values);
    REQUIRE(ev.speed_peaks.size() >= 3);
    CHECK(std::is_sorted(ev.speed_peaks.begin(), ev.speed_peaks.end()));
    CHECK(ev.speed_peaks[1] <= ev.speed_peaks[ev.speed_peaks.size() - 2]);
    CHECK(std::abs(ev.timing.contact_s - 0.30) <= 1.0 / 30.0);
    CHECK(std::abs(ev.timing.flight_s - 0.45) <= 1.0 / 30.0);
    const double h = dropjump_height(seg.values).height_m;
    CHECK(std::abs(h / ballistic_height(0.45) - 1.0) < 0.03);
  }
}

TEST_CASE("truncated drop jump is a quality error") {
  SynthParams p;
  p.kind = SynthKind::dropjump;
  p.reps = 1;
  const auto out = generate(p);
  auto toe = toe_m(out, p);
  // Keep only the drop and the first contact.
  const auto start = static_cast<std::size_t>(out.manual_segments[0].start_s * p.fps);
  const auto stop = start + static_cast<std::size_t>(1.1 * p.fps);
  std::vector<double> cut(toe.values.begin() + static_cast<std::ptrdiff_t>(start),
                          toe.values.begin() + static_cast<std::ptrdiff_t>(stop));
  CHECK_THROWS_AS(flight_contact_dropjump(metres(cut, p.fps)), QualityError);
}

TEST_CASE("acute angle from slopes") {
  CHECK(*acute_angle_from_slopes(0.0, 1.0) == doctest::Approx(45.0));
  CHECK(*acute_angle_from_slopes(2.0, 2.0) == doctest::Approx(0.0));
  CHECK_FALSE(acute_angle_from_slopes(1.0, -1.0).has_value());
  CHECK(line_intersection_angle_deg({1.0, 1.0}, {1.0, -1.0}) == doctest::Approx(90.0));
  CHECK(line_intersection_angle_deg({0.0, 1.0}, {1.0, 1.0}) == doctest::Approx(45.0));
  CHECK(line_intersection_angle_deg({2.0, 3.0}, {-4.0, -6.0}) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("vector angle") {
  CHECK(vector_angle_deg({0, 1}, {1, 0}) == doctest::Approx(90.0));
  CHECK(vector_angle_deg({0, 1}, {0, 1}) == doctest::Approx(0.0));
  CHECK(vector_angle_deg({1, 0}, {-1, 0}) == doctest::Approx(180.0));
  CHECK_THROWS_AS(vector_angle_deg({0, 0}, {1, 0}), ValidationError);
}

TEST_CASE("slope and vector forms agree on acute pairs") {
  GaussianSource rng(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = 2.0 * kPi * rng.uniform();
    const double delta = (kPi / 2.0) * rng.uniform() * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const Vec2 u = polar(a, 0.1 + rng.uniform());
    const Vec2 v = polar(a + delta, 0.1 + rng.uniform());
    const double expected = deg(std::abs(delta));
    CHECK(std::abs(line_intersection_angle_deg(u, v) - expected) < 1e-9);
    const double vec = vector_angle_deg(u, v);
    CHECK(std::abs(std::min(vec, 180.0 - vec) - expected) < 1e-9);
  }
}

TEST_CASE("joint angle series stays in range") {
  GaussianSource rng(51);
  std::vector<Vec2> a, b, c;
  for (int i = 0; i < 500; ++i) {
    a.push_back({100.0 * rng(), 100.0 * rng()});
    b.push_back({100.0 * rng(), 100.0 * rng()});
    c.push_back({100.0 * rng(), 100.0 * rng()});
  }
  const auto s = joint_angle_series(a, b, c, 30.0);
  REQUIRE(s.size() == 500);
  for (double x : s.values) {
    CHECK(x >= 0.0);
    CHECK(x <= 180.0);
  }
}

TEST_CASE("joint angle series fills zero-length frames") {
  std::vector<Vec2> hip{{0, 1}, {0, 1}, {0, 1}}, knee{{0, 0}, {0, 0}, {0, 0}}, ankle{{1, 0}, {0, 0}, {0, -1}};
  const auto s = joint_angle_series(hip, knee, ankle, 30.0);
  CHECK(s.values[0] == doctest::Approx(90.0));
  CHECK(s.values[1] == doctest::Approx(135.0));
  CHECK(s.values[2] == doctest::Approx(180.0));
}

TEST_CASE("rom from angle series") {
  std::vector<double> curl(30, 180.0);
  for (int i = 0; i <= 30; ++i) curl.push_back(180.0 - 90.0 * std::sin(kPi * i / 30.0));
  CHECK(rom_from_angle_series(degrees(curl, 30.0), {0, 14}).rom_deg == doctest::Approx(90.0));
  CHECK(rom_from_angle_series(degrees(std::vector<double>(40, 120.0), 30.0), {0, 9}).rom_deg == 0.0);
}

TEST_CASE("hip rotation rom from a swept tibia") {
  // Knee fixed, tibia pointing down the image (+y), ankle swung about the knee.
  const Vec2 knee{500.0, 500.0};
  const double len = 200.0;
  std::vector<Vec2> knees, ankles;
  auto push = [&](double theta_rad) {
    knees.push_back(knee);
    ankles.push_back({knee.x + len * std::sin(theta_rad), knee.y + len * std::cos(theta_rad)});
  };
  for (int i = 0; i < 30; ++i) push(0.0);
  for (int i = 0; i <= 30; ++i) push(-(35.0 * kPi / 180.0) * std::sin(kPi * i / 30.0));
  for (int i = 0; i <= 30; ++i) push((20.0 * kPi / 180.0) * std::sin(kPi * i / 30.0));
  const auto rom = hip_rotation_rom(knees, ankles, FrameRange{0, 29}, Side::right);
  CHECK(*rom.internal_deg == doctest::Approx(35.0).epsilon(1e-9));
  CHECK(*rom.external_deg == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(rom.rom_deg == doctest::Approx(55.0).epsilon(1e-9));

  // Mirroring the image swaps the internal and external labels.
  auto mk = knees, ma = ankles;
  for (auto& p : mk) p.x = -p.x;
  for (auto& p : ma) p.x = -p.x;
  const auto mirrored = hip_rotation_rom(mk, ma, FrameRange{0, 29}, Side::right);
  CHECK(*mirrored.internal_deg == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(*mirrored.external_deg == doctest::Approx(35.0).epsilon(1e-9));
  const auto relabelled = hip_rotation_rom(mk, ma, FrameRange{0, 29}, Side::left);
  CHECK(*relabelled.internal_deg == doctest::Approx(35.0).epsilon(1e-9));
}

TEST_CASE("mean angular velocity") {
  std::vector<double> lin(31);
  for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = 90.0 * static_cast<double>(i) / 30.0;
  CHECK(mean_angular_velocity(degrees(lin, 30.0)) == doctest::Approx(90.0));
  CHECK_THROWS_AS(mean_angular_velocity(degrees(std::vector<double>(30, 45.0), 30.0)), QualityError);

  // theta = (R/2)(1 - cos(pi t / T)); omega peaks at T/2 and crosses the
  // onset fraction where sin(pi t / T) = kOnsetFraction.
  constexpr double R = 70.0, T = 1.5, fps = 100.0;
  std::vector<double> half;
  for (int i = 0; i <= static_cast<int>(T * fps); ++i) half.push_back(R / 2.0 * (1.0 - std::cos(kPi * i / (T * fps))));
  const double t_on = T / kPi * std::asin(kOnsetFraction);
  const double expected = (R / 2.0) * std::cos(kPi * t_on / T) / (T / 2.0 - t_on);
  CHECK(std::abs(mean_angular_velocity(degrees(half, fps)) / expected - 1.0) < 0.02);
}

TEST_CASE("force-plate events") {
  ForcePlateRecord fp;
  fp.fps = 1000.0;
  auto add = [&](double value, int samples) { fp.vertical_force.insert(fp.vertical_force.end(), samples, value); };
  add(700.0, 500);
  add(0.0, 450);
  add(1500.0, 250);
  add(0.0, 400);
  add(700.0, 300);
  const auto ev = forceplate_events(fp);
  CHECK(ev.flights_s == std::vector<double>{0.45, 0.40});
  CHECK(ev.contacts_s == std::vector<double>{0.25});
  CHECK(jump_height_from_flight(0.5) == doctest::Approx(ballistic_height(0.5)));
}
