#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmc/errors.hpp"
#include "mmc/kinemetrics.hpp"
#include "mmc/mocap_io.hpp"
#include "mmc/synth.hpp"
#include "test_util.hpp"

using namespace mmc;
using testutil::TempDir;

namespace {

SynthParams params(SynthKind kind) {
  SynthParams p;
  p.kind = kind;
  return p;
}

AngularMetrics rotation_from_mmc(const SynthOutput& out, Side side) {
  const auto knee = out.mmc.trajectory(knee_of(side));
  const auto ankle = out.mmc.trajectory(ankle_of(side));
  const auto rest = static_cast<std::size_t>(0.5 * out.mmc.fps);
  return hip_rotation_rom(knee, ankle, FrameRange{0, rest - 1}, side);
}

}  // namespace

TEST_CASE("ballistic height") {
  CHECK(ballistic_height(0.50) == doctest::Approx(9.80665 * 0.25 / 8.0));
  CHECK(ballistic_height(0.50) == doctest::Approx(0.3065).epsilon(1e-3));
}

TEST_CASE("jump truth is exact and the COM rises by the ballistic height") {
  auto p = params(SynthKind::cmj);
  p.flight_s = 0.48;
  p.fps = 100.0;
  const auto out = gen_jump(p);
  REQUIRE(out.truth.reps.size() == 3);
  for (const auto& r : out.truth.reps) {
    CHECK(r.flight_s == 0.48);
    CHECK(r.height_m == doctest::Approx(ballistic_height(0.48)).epsilon(1e-12));
  }
  const double top = *std::max_element(out.com_m.begin(), out.com_m.end());
  CHECK(top == doctest::Approx(ballistic_height(0.48)).epsilon(2e-3));
  CHECK(out.truth.ptm_true == p.ptm_true);
}

TEST_CASE("press truth follows the half-sine") {
  auto p = params(SynthKind::press);
  p.amplitude_m = 0.6;
  p.concentric_s = 1.0;
  const auto out = gen_press(p);
  for (const auto& r : out.truth.reps) {
    CHECK(r.peak_mps == doctest::Approx(0.6 * std::numbers::pi / 2.0).epsilon(1e-12));
    CHECK(r.peak_mps == doctest::Approx(0.9425).epsilon(1e-4));
    CHECK(r.mean_mps == doctest::Approx(0.6).epsilon(1e-12));
  }
  p.amplitude_m = 1.2;
  const auto doubled = gen_press(p);
  CHECK(doubled.truth.reps[0].peak_mps == doctest::Approx(2.0 * out.truth.reps[0].peak_mps));
  CHECK(doubled.truth.reps[0].mean_mps == doctest::Approx(2.0 * out.truth.reps[0].mean_mps));
  p.amplitude_m = 0.0;
  const auto flat = gen_press(p);
  CHECK(flat.truth.reps[0].peak_mps == 0.0);
  CHECK(flat.truth.reps[0].mean_mps == 0.0);
}

TEST_CASE("rotation sweep is recovered from the keypoints") {
  for (double rom : {45.0, 90.0}) {
    for (Side side : {Side::right, Side::left}) {
      auto p = params(SynthKind::rotation);
      p.rom_deg = rom;
      p.dominant_side = side;
      p.fps = 30.0;
      p.reps = 1;
      const auto out = gen_rotation(p);
      const auto m = rotation_from_mmc(out, side);
      CHECK(std::abs(*m.internal_deg - rom) <= 0.5);
      CHECK(*m.external_deg <= 0.5);
    }
  }
}

TEST_CASE("external rotation moves the other way") {
  auto p = params(SynthKind::rotation);
  p.rom_deg = 30.0;
  p.internal_rotation = false;
  p.reps = 1;
  const auto m = rotation_from_mmc(gen_rotation(p), Side::right);
  CHECK(std::abs(*m.external_deg - 30.0) <= 0.5);
  CHECK(*m.internal_deg <= 0.5);
}

TEST_CASE("sweep limits") {
  auto p = params(SynthKind::rotation);
  p.rom_deg = 0.0;
  CHECK_THROWS_AS(gen_rotation(p), ValidationError);
  p.rom_deg = 180.0;
  CHECK_THROWS_AS(gen_rotation(p), ValidationError);
  p.rom_deg = 120.0;
  CHECK_THROWS_AS(gen_rotation(p), ValidationError);
  p.kind = SynthKind::curl;
  CHECK_NOTHROW(gen_rotation(p));
}

TEST_CASE("generators check their kind") {
  CHECK_THROWS_AS(gen_jump(params(SynthKind::press)), ValidationError);
  CHECK_THROWS_AS(gen_press(params(SynthKind::cmj)), ValidationError);
  CHECK_THROWS_AS(gen_rotation(params(SynthKind::rjt)), ValidationError);
}

TEST_CASE("infeasible duration") {
  auto p = params(SynthKind::cmj);
  p.duration_s = 1.0;
  CHECK_THROWS_AS(generate(p), ValidationError);
  p.duration_s = 0.0;
  p.flight_s = -0.1;
  CHECK_THROWS_AS(generate(p), ValidationError);
}

TEST_CASE("fixed seed gives identical output") {
  for (auto kind : {SynthKind::cmj, SynthKind::dropjump, SynthKind::rjt, SynthKind::press, SynthKind::rotation,
                    SynthKind::curl}) {
    auto p = params(kind);
    p.noise_sigma_px = 1.5;
    p.omc_noise_mm = 1.0;
    p.forceplate_noise_n = 5.0;
    p.rep_jitter = 0.05;
    p.seed = 99;
    const auto a = generate(p);
    const auto b = generate(p);
    CHECK(a.mmc.frames == b.mmc.frames);
    CHECK(a.forceplate.vertical_force == b.forceplate.vertical_force);
    CHECK(a.omc.size() == b.omc.size());
    p.seed = 100;
    CHECK(generate(p).mmc.frames != a.mmc.frames);
  }
}

TEST_CASE("GaussianSource moments") {
  GaussianSource g(1234);
  double sum = 0.0, sq = 0.0;
  constexpr int kN = 200000;
  for (int i = 0; i < kN; ++i) {
    const double x = g();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / kN;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sq / kN - mean * mean - 1.0) < 0.02);
  GaussianSource u(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("limb-swap injection exchanges the ankles") {
  auto p = params(SynthKind::cmj);
  const auto clean = generate(p);
  p.swap_frames = FrameRange{10, 20};
  const auto swapped = generate(p);
  const auto l = idx(Body25::LAnkle), r = idx(Body25::RAnkle);
  CHECK(swapped.mmc.frames[15][l].x == clean.mmc.frames[15][r].x);
  CHECK(swapped.mmc.frames[15][r].x == clean.mmc.frames[15][l].x);
  CHECK(swapped.mmc.frames[15][l].confidence == p.swap_confidence);
  CHECK(swapped.mmc.frames[30][l] == clean.mmc.frames[30][l]);
}

TEST_CASE("fixture files parse back to the generated streams") {
  TempDir dir("fixture");
  auto p = params(SynthKind::press);
  p.noise_sigma_px = 0.7;
  p.omc_noise_mm = 0.5;
  const auto out = generate(p);
  FixtureOptions fo;
  fo.task = TaskCode::OHP;
  fo.participant_id = "P07";
  fo.height_m = 1.75;
  const auto path = write_fixture(out, p, fo, dir.path());
  const auto s = load_session(path);
  CHECK(s.manifest.participant_id == "P07");
  CHECK(s.manifest.task == TaskCode::OHP);
  CHECK(s.manifest.object_len_px.has_value());
  REQUIRE(s.mmc.has_value());
  CHECK(s.mmc->frames == out.mmc.frames);
  REQUIRE(s.omc.has_value());
  CHECK(s.omc->size() == out.omc.size());
  CHECK(s.omc->has("bar_L"));
}

TEST_CASE("mini study layout") {
  TempDir dir("mini");
  const auto manifests = write_mini_study(dir.path(), 2, 2, 7);
  CHECK(manifests.size() == 8);
  for (const auto& m : manifests) CHECK(std::filesystem::exists(m));
  CHECK_THROWS_AS(write_mini_study(dir.path(), 1, 3, 7), ValidationError);
}

TEST_CASE("task to generator mapping") {
  CHECK(synth_kind_for_task(TaskCode::CMJUL) == SynthKind::cmj);
  CHECK(synth_kind_for_task(TaskCode::DJBL) == SynthKind::dropjump);
  CHECK(synth_kind_for_task(TaskCode::RJT) == SynthKind::rjt);
  CHECK(synth_kind_for_task(TaskCode::BSQ) == SynthKind::press);
  CHECK(synth_kind_for_task(TaskCode::HER) == SynthKind::rotation);
  CHECK(synth_kind_for_task(TaskCode::SLR) == SynthKind::curl);
  for (auto k : {SynthKind::cmj, SynthKind::rotation, SynthKind::curl}) {
    CHECK(synth_kind_from_string(to_string(k)) == k);
  }
}
