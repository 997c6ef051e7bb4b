// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include <fmt/format.h>

#include "mmc/calibration.hpp"
#include "mmc/errors.hpp"
#include "mmc/kinemetrics.hpp"

namespace mmc {

namespace fs = std::filesystem;

std::string_view to_string(SynthKind k) {
  switch (k) {
    case SynthKind::cmj: return "cmj";
    case SynthKind::dropjump: return "dropjump";
    case SynthKind::rjt: return "rjt";
    case SynthKind::press: return "press";
    case SynthKind::rotation: return "rotation";
    case SynthKind::curl: return "curl";
  }
  return "cmj";
}

SynthKind synth_kind_from_string(std::string_view s) {
  for (auto k : {SynthKind::cmj, SynthKind::dropjump, SynthKind::rjt, SynthKind::press, SynthKind::rotation,
                 SynthKind::curl}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError(fmt::format("unknown synth kind '{}'", s));
}

SynthKind synth_kind_for_task(TaskCode task) {
  switch (task) {
    case TaskCode::CMJBL:
    case TaskCode::CMJUL: return SynthKind::cmj;
    case TaskCode::DJBL:
    case TaskCode::DJUL: return SynthKind::dropjump;
    case TaskCode::RJT: return SynthKind::rjt;
    case TaskCode::OHP:
    case TaskCode::BSQ: return SynthKind::press;
    case TaskCode::HIR:
    case TaskCode::HER: return SynthKind::rotation;
    case TaskCode::NDC:
    case TaskCode::SLS:
    case TaskCode::SLR: return SynthKind::curl;
  }
  return SynthKind::cmj;
}

double ballistic_height(double flight_s) { return kGravity * flight_s * flight_s / 8.0; }

double GaussianSource::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double GaussianSource::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;

// Displacement and acceleration of a scalar coordinate.
struct Kin {
  double z{0.0};
  double a{0.0};
};

// Piecewise motion in local time; holds the last value past the end.
class Track {
 public:
  using Fn = std::function<Kin(double)>;

  void add(double dur, Fn fn) {
    starts_.push_back(end_);
    durs_.push_back(dur);
    fns_.push_back(std::move(fn));
    end_ += dur;
  }
  void hold(double dur, double value) {
    add(dur, [value](double) { return Kin{value, 0.0}; });
  }
  // Half-cosine transition between two values.
  void ease(double dur, double from, double to) {
    add(dur, [=](double tau) {
      const double w = kPi / dur;
      return Kin{from + (to - from) * (1.0 - std::cos(w * tau)) / 2.0, (to - from) * w * w * std::cos(w * tau) / 2.0};
    });
  }
  double end() const { return end_; }
  double last() const { return fns_.empty() ? 0.0 : fns_.back()(durs_.back()).z; }

  Kin operator()(double t) const {
    if (fns_.empty()) return {};
    if (t >= end_) return {fns_.back()(durs_.back()).z, 0.0};
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - starts_.begin() - 1));
    return fns_[k](std::max(0.0, t - starts_[k]));
  }

 private:
  std::vector<double> starts_;
  std::vector<double> durs_;
  std::vector<Fn> fns_;
  double end_{0.0};
};

// Jump building blocks: vertical centre-of-mass displacement.
constexpr double kCountermovementRest = 1.5;
constexpr double kLandingS = 1.2;
constexpr double kLandingDecayS = 0.1;

double countermovement_s(double v0) { return std::max(0.6, 3.0 * v0 / kGravity); }

void add_countermovement(Track& tr, double v0) {
  const double T = countermovement_s(v0);
  tr.add(T, [=](double t) { return Kin{v0 * t * t * (t - T) / (T * T), v0 * (6.0 * t - 2.0 * T) / (T * T)}; });
}

void add_flight(Track& tr, double flight_s, double base = 0.0) {
  const double v0 = kGravity * flight_s / 2.0;
  tr.add(flight_s, [=](double t) { return Kin{base + v0 * t - kGravity * t * t / 2.0, -kGravity}; });
}

void add_landing(Track& tr, double v_in) {
  const double c = kLandingDecayS;
  tr.add(kLandingS, [=](double t) {
    const double e = std::exp(-t / c);
    return Kin{-v_in * t * e, v_in * e * (2.0 / c - t / (c * c))};
  });
}

// Ground contact between an impact at -v_in and a take-off at +v_out.
void add_contact(Track& tr, double contact_s, double v_in, double v_out) {
  const double C = contact_s;
  tr.add(C, [=](double tau) {
    const double s = tau / C;
    const double h10 = s * s * s - 2.0 * s * s + s;
    const double h11 = s * s * s - s * s;
    return Kin{C * (-v_in * h10 + v_out * h11), (-v_in * (6.0 * s - 4.0) + v_out * (6.0 * s - 2.0)) / C};
  });
}

double jittered(double value, double jitter, GaussianSource& rng) {
  if (jitter <= 0.0) return value;
  return value * std::max(0.2, 1.0 + jitter * rng());
}

// Body landmarks in the lab frame (metres): x toward the participant's left,
// y anterior, z up.
using Pose = std::array<Vec3, kBody25Count>;

Vec3& at(Pose& p, Body25 k) { return p[idx(k)]; }

Pose standing_pose(const SynthParams& sp) {
  const double S = sp.stature_m;
  const double sh = sp.shoulder_to_toe_fraction * S;
  Pose p{};
  auto set = [&](Body25 k, double x, double y, double z) { at(p, k) = {x, y, z}; };
  set(Body25::Nose, 0.0, 0.09, 0.935 * S);
  set(Body25::Neck, 0.0, 0.0, sh);
  set(Body25::RShoulder, -0.19, 0.0, sh);
  set(Body25::LShoulder, 0.19, 0.0, sh);
  set(Body25::RElbow, -0.22, 0.0, 0.63 * S);
  set(Body25::LElbow, 0.22, 0.0, 0.63 * S);
  set(Body25::RWrist, -0.23, 0.02, 0.485 * S);
  set(Body25::LWrist, 0.23, 0.02, 0.485 * S);
  set(Body25::MidHip, 0.0, 0.0, 0.53 * S);
  set(Body25::RHip, -0.09, 0.0, 0.53 * S);
  set(Body25::LHip, 0.09, 0.0, 0.53 * S);
  set(Body25::RKnee, -0.1, 0.03, 0.285 * S);
  set(Body25::LKnee, 0.1, 0.03, 0.285 * S);
  set(Body25::RAnkle, -0.1, 0.0, 0.045 * S);
  set(Body25::LAnkle, 0.1, 0.0, 0.045 * S);
  set(Body25::REye, -0.03, 0.08, 0.945 * S);
  set(Body25::LEye, 0.03, 0.08, 0.945 * S);
  set(Body25::REar, -0.07, 0.0, 0.935 * S);
  set(Body25::LEar, 0.07, 0.0, 0.935 * S);
  set(Body25::RBigToe, -0.12, 0.19, 0.0);
  set(Body25::LBigToe, 0.12, 0.19, 0.0);
  set(Body25::RSmallToe, -0.16, 0.16, 0.0);
  set(Body25::LSmallToe, 0.16, 0.16, 0.0);
  set(Body25::RHeel, -0.1, -0.05, 0.0);
  set(Body25::LHeel, 0.1, -0.05, 0.0);
  return p;
}

bool is_foot(Body25 k) {
  switch (k) {
    case Body25::RAnkle:
    case Body25::LAnkle:
    case Body25::RBigToe:
    case Body25::LBigToe:
    case Body25::RSmallToe:
    case Body25::LSmallToe:
    case Body25::RHeel:
    case Body25::LHeel: return true;
    default: return false;
  }
}

bool is_knee(Body25 k) { return k == Body25::RKnee || k == Body25::LKnee; }

// Shifts the body vertically: feet never go below the floor, knees take half
// of any dip.
void lift(Pose& p, double z) {
  const double feet = std::max(z, 0.0);
  for (std::size_t k = 0; k < kBody25Count; ++k) {
    const auto kp = static_cast<Body25>(k);
    if (is_foot(kp)) {
      p[k].z += feet;
    } else if (is_knee(kp)) {
      p[k].z += feet + 0.5 * (z - feet);
    } else {
      p[k].z += z;
    }
  }
}

enum class View { front, side };

// A motion model: where every landmark is at time t, plus the centre of mass
// track for the force plate.
struct Model {
  std::function<Pose(double)> pose;
  Track com;  // vertical COM displacement; force plate reads 0 while com.z > 0
  bool jumps{false};
  double duration{0.0};
  View view{View::front};
  std::vector<RepTruth> reps;
  std::vector<double> hop_flights;
  std::vector<double> hop_contacts;
  std::vector<ManualSegment> segments;
};

Model jump_model(const SynthParams& sp, GaussianSource& rng) {
  Model m;
  m.jumps = true;
  Track& tr = m.com;
  const Pose base = standing_pose(sp);
  if (sp.kind == SynthKind::cmj) {
    for (int r = 0; r < sp.reps; ++r) {
      const double tf = jittered(sp.flight_s, sp.rep_jitter, rng);
      const double v0 = kGravity * tf / 2.0;
      tr.hold(kCountermovementRest, 0.0);
      add_countermovement(tr, v0);
      RepTruth t;
      t.flight_s = tf;
      t.height_m = ballistic_height(tf);
      t.event_time_s = tr.end() + tf / 2.0;
      m.reps.push_back(t);
      add_flight(tr, tf);
      add_landing(tr, v0);
    }
    tr.hold(1.0, 0.0);
  } else if (sp.kind == SynthKind::rjt) {
    const int flights = sp.reps + 1;
    std::vector<double> tf(static_cast<std::size_t>(flights));
    std::vector<double> tc(static_cast<std::size_t>(sp.reps));
    for (auto& f : tf) f = jittered(sp.flight_s, sp.rep_jitter, rng);
    for (auto& c : tc) c = jittered(sp.contact_s, sp.rep_jitter, rng);
    tr.hold(kCountermovementRest, 0.0);
    add_countermovement(tr, kGravity * tf[0] / 2.0);
    for (int k = 0; k < flights; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      add_flight(tr, tf[ku]);
      const double v_in = kGravity * tf[ku] / 2.0;
      if (k + 1 < flights) {
        RepTruth t;
        t.contact_s = tc[ku];
        t.flight_s = tf[ku + 1];
        t.height_m = ballistic_height(tf[ku + 1]);
        t.event_time_s = tr.end() + tc[ku] + tf[ku + 1] / 2.0;
        m.reps.push_back(t);
        add_contact(tr, tc[ku], v_in, kGravity * tf[ku + 1] / 2.0);
      } else {
        add_landing(tr, v_in);
      }
    }
    tr.hold(1.5, 0.0);
    m.hop_flights = tf;
    m.hop_contacts = tc;
  } else {
    const double hp = sp.platform_m;
    const double t_drop = std::sqrt(2.0 * hp / kGravity);
    const double v_drop = kGravity * t_drop;
    for (int r = 0; r < sp.reps; ++r) {
      const double tf = jittered(sp.flight_s, sp.rep_jitter, rng);
      const double tc = jittered(sp.contact_s, sp.rep_jitter, rng);
      const double v0 = kGravity * tf / 2.0;
      tr.hold(1.5, hp);
      const double step_off = tr.end();
      tr.add(t_drop, [=](double t) { return Kin{hp - kGravity * t * t / 2.0, -kGravity}; });
      add_contact(tr, tc, v_drop, v0);
      RepTruth t;
      t.flight_s = tf;
      t.contact_s = tc;
      t.height_m = ballistic_height(tf);
      t.event_time_s = tr.end() + tf / 2.0;
      m.reps.push_back(t);
      add_flight(tr, tf);
      const double landed = tr.end();
      add_landing(tr, v0);
      m.segments.push_back({step_off - 1.0, landed + 1.0});
      tr.hold(0.3, 0.0);
      tr.ease(1.0, 0.0, hp);
    }
    tr.hold(1.0, hp);
  }
  m.duration = tr.end();
  const Track* com = &m.com;
  m.pose = [base, com](double t) {
    Pose p = base;
    lift(p, (*com)(t).z);
    return p;
  };
  return m;
}

Model press_model(const SynthParams& sp, GaussianSource& rng) {
  Model m;
  Track bar;  // displacement of the bar from its lowest position
  const double A = sp.amplitude_m;
  if (!sp.squat) {
    bar.hold(1.5, 0.0);
    for (int r = 0; r < sp.reps; ++r) {
      const double T = jittered(sp.concentric_s, sp.rep_jitter, rng);
      RepTruth t;
      t.peak_mps = A * kPi / (2.0 * T);
      t.mean_mps = A / T;
      t.event_time_s = bar.end() + T;
      m.reps.push_back(t);
      bar.ease(T, 0.0, A);
      bar.hold(0.6, A);
      bar.ease(1.2, A, 0.0);
      bar.hold(0.8, 0.0);
    }
  } else {
    bar.hold(1.0, A);
    for (int r = 0; r < sp.reps; ++r) {
      const double T = jittered(sp.concentric_s, sp.rep_jitter, rng);
      bar.ease(1.2, A, 0.0);
      bar.hold(0.3, 0.0);
      RepTruth t;
      t.peak_mps = A * kPi / (2.0 * T);
      t.mean_mps = A / T;
      t.event_time_s = bar.end() + T;
      m.reps.push_back(t);
      bar.ease(T, 0.0, A);
      bar.hold(1.0, A);
    }
  }
  m.duration = bar.end();
  const Pose base = standing_pose(sp);
  const double sh = sp.shoulder_to_toe_fraction * sp.stature_m;
  const bool squat = sp.squat;
  m.pose = [base, bar, A, sh, squat](double t) {
    Pose p = base;
    const double b = bar(t).z;
    double grip = 0.0;
    if (squat) {
      lift(p, b - A);
      grip = sh + 0.03 + (b - A);
    } else {
      grip = sh + 0.02 + b;
    }
    for (Side s : {Side::left, Side::right}) {
      auto& w = at(p, wrist_of(s));
      const auto& sho = at(p, shoulder_of(s));
      w.z = grip;
      w.x = sho.x * 1.3;
      auto& e = at(p, s == Side::left ? Body25::LElbow : Body25::RElbow);
      e = {sho.x * 1.5, 0.0, (sho.z + w.z) / 2.0 - 0.05};
    }
    return p;
  };
  return m;
}

// Seated hip rotation seen from the front: the dominant tibia swings in the
// frontal plane about the knee.
Model rotation_model(const SynthParams& sp, GaussianSource& rng) {
  Model m;
  Track phi;  // degrees
  phi.hold(1.0, 0.0);
  for (int r = 0; r < sp.reps; ++r) {
    const double rom = jittered(sp.rom_deg, sp.rep_jitter, rng);
    RepTruth t;
    t.rom_deg = rom;
    t.event_time_s = phi.end() + sp.sweep_s + 0.3;
    m.reps.push_back(t);
    phi.ease(sp.sweep_s, 0.0, rom);
    phi.hold(0.6, rom);
    phi.ease(sp.sweep_s, rom, 0.0);
    phi.hold(1.0, 0.0);
  }
  m.duration = phi.end();
  const double S = sp.stature_m;
  const double seat = 0.27 * S;
  const double shin = 0.25 * S;
  Pose seated = standing_pose(sp);
  const double drop = 0.53 * S - seat;
  for (std::size_t k = 0; k < kBody25Count; ++k) {
    const auto kp = static_cast<Body25>(k);
    if (!is_foot(kp) && !is_knee(kp)) seated[k].z -= drop;
  }
  for (Side s : {Side::left, Side::right}) {
    auto& knee = at(seated, knee_of(s));
    knee = {at(seated, hip_of(s)).x, 0.45, seat};
  }
  const Side dom = sp.dominant_side;
  // Lateral is -x for the right leg; internal rotation carries the foot
  // laterally.
  const double lateral = dom == Side::right ? -1.0 : 1.0;
  const double dir = sp.internal_rotation ? lateral : -lateral;
  auto place_foot = [shin](Pose& p, Side s, double angle_deg, double sign) {
    const Vec3 knee = at(p, knee_of(s));
    const double a = angle_deg * kDegToRad;
    const Vec3 ankle{knee.x + sign * shin * std::sin(a), knee.y, knee.z - shin * std::cos(a)};
    const Vec3 old_ankle = at(p, ankle_of(s));
    at(p, ankle_of(s)) = ankle;
    const bool left = s == Side::left;
    for (Body25 k : {left ? Body25::LBigToe : Body25::RBigToe, left ? Body25::LSmallToe : Body25::RSmallToe,
                     left ? Body25::LHeel : Body25::RHeel}) {
      auto& q = at(p, k);
      q = {ankle.x + (q.x - old_ankle.x), ankle.y + (q.y - old_ankle.y), ankle.z + (q.z - old_ankle.z)};
    }
  };
  m.pose = [seated, phi, dom, dir, place_foot](double t) {
    Pose p = seated;
    const Side other = dom == Side::right ? Side::left : Side::right;
    place_foot(p, other, 0.0, 1.0);
    place_foot(p, dom, phi(t).z, dir);
    return p;
  };
  return m;
}

// Kneeling curl seen from the right: the thigh and trunk lean forward about
// the knee while the shin stays on the floor.
Model curl_model(const SynthParams& sp, GaussianSource& rng) {
  Model m;
  m.view = View::side;
  Track phi;
  phi.hold(1.0, 0.0);
  const double T = sp.sweep_s * 1.5;
  for (int r = 0; r < sp.reps; ++r) {
    const double rom = jittered(sp.rom_deg, sp.rep_jitter, rng);
    RepTruth t;
    t.rom_deg = rom;
    const double t_on = T / kPi * std::asin(kOnsetFraction);
    t.mean_ang_vel_dps = (rom / 2.0) * std::cos(kPi * t_on / T) / (T / 2.0 - t_on);
    t.event_time_s = phi.end() + T + 0.15;
    m.reps.push_back(t);
    phi.ease(T, 0.0, rom);
    phi.hold(0.3, rom);
    phi.ease(1.5 * T, rom, 0.0);
    phi.hold(1.0, 0.0);
  }
  m.duration = phi.end();
  const double S = sp.stature_m;
  const double thigh = 0.245 * S;
  const double shin = 0.24 * S;
  m.pose = [phi, S, thigh, shin](double t) {
    const double a = phi(t).z * kDegToRad;
    Pose p{};
    for (Side s : {Side::left, Side::right}) {
      const double x = s == Side::left ? 0.1 : -0.1;
      const Vec3 knee{x, 0.0, 0.05};
      at(p, knee_of(s)) = knee;
      at(p, ankle_of(s)) = {x, -shin, 0.08};
      const bool left = s == Side::left;
      at(p, left ? Body25::LBigToe : Body25::RBigToe) = {x, -shin - 0.08, 0.0};
      at(p, left ? Body25::LSmallToe : Body25::RSmallToe) = {x * 1.4, -shin - 0.07, 0.0};
      at(p, left ? Body25::LHeel : Body25::RHeel) = {x, -shin + 0.02, 0.14};
      at(p, hip_of(s)) = {x * 0.9, knee.y + thigh * std::sin(a), knee.z + thigh * std::cos(a)};
    }
    auto along = [&](double r, double x) { return Vec3{x, r * std::sin(a), 0.05 + r * std::cos(a)}; };
    const double trunk = 0.29 * S;
    at(p, Body25::MidHip) = along(thigh, 0.0);
    at(p, Body25::Neck) = along(thigh + trunk, 0.0);
    at(p, Body25::RShoulder) = along(thigh + trunk, -0.19);
    at(p, Body25::LShoulder) = along(thigh + trunk, 0.19);
    at(p, Body25::RElbow) = along(thigh + 0.6 * trunk, -0.22);
    at(p, Body25::LElbow) = along(thigh + 0.6 * trunk, 0.22);
    at(p, Body25::RWrist) = along(thigh + 0.25 * trunk, -0.23);
    at(p, Body25::LWrist) = along(thigh + 0.25 * trunk, 0.23);
    const Vec3 head = along(thigh + trunk + 0.11 * S, 0.0);
    at(p, Body25::Nose) = {0.0, head.y + 0.09, head.z};
    at(p, Body25::REye) = {-0.03, head.y + 0.08, head.z + 0.01};
    at(p, Body25::LEye) = {0.03, head.y + 0.08, head.z + 0.01};
    at(p, Body25::REar) = {-0.07, head.y, head.z};
    at(p, Body25::LEar) = {0.07, head.y, head.z};
    return p;
  };
  return m;
}

Model build_model(const SynthParams& sp, GaussianSource& rng) {
  switch (sp.kind) {
    case SynthKind::cmj:
    case SynthKind::dropjump:
    case SynthKind::rjt: return jump_model(sp, rng);
    case SynthKind::press: return press_model(sp, rng);
    case SynthKind::rotation: return rotation_model(sp, rng);
    case SynthKind::curl: return curl_model(sp, rng);
  }
  return jump_model(sp, rng);
}

void validate(const SynthParams& sp) {
  if (!(sp.fps > 0.0) || !(sp.omc_fps > 0.0) || !(sp.forceplate_fps > 0.0)) {
    throw ValidationError("sampling rates must be positive");
  }
  if (sp.reps < 1) throw ValidationError("reps must be at least 1");
  if (!(sp.ptm_true > 0.0)) throw ValidationError("ptm_true must be positive");
  if (!(sp.flight_s > 0.0) || !(sp.contact_s > 0.0) || !(sp.concentric_s > 0.0) || !(sp.sweep_s > 0.0)) {
    throw ValidationError("phase durations must be positive");
  }
  if (!(sp.rom_deg > 0.0 && sp.rom_deg < 180.0)) throw ValidationError("rom_deg must lie in (0, 180)");
  // Hip rotation is measured as an acute intersection angle.
  if (sp.kind == SynthKind::rotation && sp.rom_deg > 90.0) {
    throw ValidationError("rotation rom_deg must not exceed 90");
  }
  if (sp.noise_sigma_px < 0.0 || sp.omc_noise_mm < 0.0 || sp.forceplate_noise_n < 0.0) {
    throw ValidationError("noise levels must be non-negative");
  }
}

struct Projector {
  View view;
  double ptm;
  double cx{640.0};
  double floor_y{1000.0};

  Vec2 operator()(const Vec3& w) const {
    const double horiz = view == View::front ? w.x : w.y;
    return {cx + horiz / ptm, floor_y - w.z / ptm};
  }
};

}  // namespace

SynthOutput generate(const SynthParams& sp) {
  validate(sp);
  GaussianSource rng(sp.seed);
  Model model = build_model(sp, rng);
  const double duration = sp.duration_s > 0.0 ? sp.duration_s : model.duration;
  if (duration + 1e-9 < model.duration) {
    throw ValidationError(fmt::format("infeasible parameters: motion needs {:.2f} s but duration is {:.2f} s",
                                      model.duration, duration));
  }
  SynthOutput out;
  out.truth.reps = model.reps;
  out.truth.hop_flights_s = model.hop_flights;
  out.truth.hop_contacts_s = model.hop_contacts;
  out.truth.ptm_true = sp.ptm_true;
  out.manual_segments = model.segments;

  // Markerless stream.
  const auto n = static_cast<std::size_t>(std::floor(duration * sp.fps));
  const Projector proj{model.view, sp.ptm_true};
  out.mmc.fps = sp.fps;
  out.mmc.frames.resize(n);
  out.com_m.resize(n);
  GaussianSource pixel_noise(sp.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sp.fps;
    const Pose pose = model.pose(t);
    out.com_m[i] = model.jumps ? model.com(t).z : pose[idx(Body25::MidHip)].z;
    for (std::size_t k = 0; k < kBody25Count; ++k) {
      Vec2 px = proj(pose[k]);
      if (sp.noise_sigma_px > 0.0) {
        px.x += sp.noise_sigma_px * pixel_noise();
        px.y += sp.noise_sigma_px * pixel_noise();
      }
      out.mmc.frames[i][k] = {px.x, px.y, 0.9};
    }
  }
  if (sp.swap_frames) {
    const auto& r = *sp.swap_frames;
    if (r.last < r.first || r.last >= n) throw ValidationError("swap_frames outside the recording");
    for (std::size_t i = r.first; i <= r.last; ++i) {
      auto& f = out.mmc.frames[i];
      std::swap(f[idx(Body25::LAnkle)], f[idx(Body25::RAnkle)]);
      f[idx(Body25::LAnkle)].confidence = sp.swap_confidence;
      f[idx(Body25::RAnkle)].confidence = sp.swap_confidence;
    }
  }

  // Optical markers, millimetres.
  const auto n_omc = static_cast<std::size_t>(std::floor(duration * sp.omc_fps));
  out.omc.fps = sp.omc_fps;
  GaussianSource marker_noise(sp.seed ^ 0xc2b2ae3d27d4eb4fULL);
  const std::vector<std::pair<std::string, Body25>> markers = {
      {"toe_L", Body25::LBigToe}, {"toe_R", Body25::RBigToe}, {"ankle_L", Body25::LAnkle},
      {"ankle_R", Body25::RAnkle}, {"knee_L", Body25::LKnee},  {"knee_R", Body25::RKnee},
      {"hip_L", Body25::LHip},     {"hip_R", Body25::RHip},    {"bar_L", Body25::LWrist},
      {"bar_R", Body25::RWrist}};
  for (const auto& [name, kp] : markers) out.omc.markers[name].resize(n_omc);
  for (std::size_t i = 0; i < n_omc; ++i) {
    const Pose pose = model.pose(static_cast<double>(i) / sp.omc_fps);
    for (const auto& [name, kp] : markers) {
      Vec3 w = pose[idx(kp)];
      w = {w.x * 1000.0, w.y * 1000.0, w.z * 1000.0};
      if (sp.omc_noise_mm > 0.0) {
        w.x += sp.omc_noise_mm * marker_noise();
        w.y += sp.omc_noise_mm * marker_noise();
        w.z += sp.omc_noise_mm * marker_noise();
      }
      out.omc.markers[name][i] = w;
    }
  }

  // Vertical ground reaction force.
  const auto n_fp = static_cast<std::size_t>(std::floor(duration * sp.forceplate_fps));
  out.forceplate.fps = sp.forceplate_fps;
  out.forceplate.vertical_force.resize(n_fp);
  GaussianSource force_noise(sp.seed ^ 0x165667b19e3779f9ULL);
  const double weight = sp.body_mass_kg * kGravity;
  for (std::size_t i = 0; i < n_fp; ++i) {
    const double t = static_cast<double>(i) / sp.forceplate_fps;
    double f = weight;
    if (model.jumps) {
      const Kin k = model.com(t);
      f = k.z > 0.0 ? 0.0 : std::max(0.0, sp.body_mass_kg * (kGravity + k.a));
    }
    if (sp.forceplate_noise_n > 0.0) f += sp.forceplate_noise_n * force_noise();
    out.forceplate.vertical_force[i] = f;
  }
  return out;
}

SynthOutput gen_jump(const SynthParams& params) {
  if (params.kind != SynthKind::cmj && params.kind != SynthKind::dropjump && params.kind != SynthKind::rjt) {
    throw ValidationError("gen_jump needs a cmj, dropjump or rjt kind");
  }
  return generate(params);
}

SynthOutput gen_press(const SynthParams& params) {
  if (params.kind != SynthKind::press) throw ValidationError("gen_press needs the press kind");
  return generate(params);
}

SynthOutput gen_rotation(const SynthParams& params) {
  if (params.kind != SynthKind::rotation && params.kind != SynthKind::curl) {
    throw ValidationError("gen_rotation needs the rotation or curl kind");
  }
  return generate(params);
}

fs::path write_fixture(const SynthOutput& output, const SynthParams& params, const FixtureOptions& options,
                       const fs::path& dir) {
  fs::create_directories(dir);
  SessionManifest m;
  m.participant_id = options.participant_id;
  m.task = options.task;
  m.height_m = options.height_m;
  m.dominant_side = params.dominant_side;
  m.camera_view = params.kind == SynthKind::curl ? CameraView::right : CameraView::front;
  m.mmc_fps = params.fps;
  m.omc_fps = params.omc_fps;
  m.mmc_dir = dir / "mmc";
  fs::remove_all(*m.mmc_dir);
  write_openpose_dir(output.mmc, *m.mmc_dir, options.participant_id);
  if (options.write_omc) {
    m.omc_csv = dir / "omc.csv";
    write_omc_csv(output.omc, *m.omc_csv);
  }
  if (options.write_forceplate) {
    m.forceplate_csv = dir / "forceplate.csv";
    write_forceplate_csv(output.forceplate, *m.forceplate_csv);
  }
  if (params.kind == SynthKind::press) m.object_len_px = kBarbellLengthM / params.ptm_true;
  m.expected_reps = params.reps;
  m.segments = output.manual_segments;
  const auto path = dir / "manifest.json";
  write_manifest(m, path);
  return path;
}

std::vector<fs::path> write_mini_study(const fs::path& dir, int participants, int reps, std::uint64_t seed) {
  if (participants < 2 || reps < 1) throw ValidationError("mini study needs at least 2 participants");
  GaussianSource rng(seed);
  std::vector<fs::path> manifests;
  for (int p = 0; p < participants; ++p) {
    const std::string pid = fmt::format("P{:02d}", p + 1);
    SynthParams base;
    base.fps = 30.0;
    base.reps = reps;
    base.stature_m = 1.75 + 0.08 * rng();
    base.shoulder_to_toe_fraction = 0.75 + 0.01 * rng();
    base.ptm_true = 0.0018 + 0.0006 * rng.uniform();
    base.noise_sigma_px = 1.5;
    base.omc_noise_mm = 1.0;
    base.forceplate_noise_n = 5.0;
    base.rep_jitter = 0.06;
    base.dominant_side = p % 2 == 0 ? Side::right : Side::left;
    const double flight = 0.48 + 0.05 * rng();
    const double hop_flight = 0.36 + 0.03 * rng();
    const double hop_contact = 0.24 + 0.03 * rng();
    const double concentric = 1.0 + 0.15 * rng();
    const double amplitude = 0.55 + 0.05 * rng();
    const double rom = 40.0 + 6.0 * rng();
    const double bar_error = 1.0 + 0.01 * rng();

    for (TaskCode task : {TaskCode::CMJBL, TaskCode::OHP, TaskCode::RJT, TaskCode::HIR}) {
      SynthParams sp = base;
      sp.kind = synth_kind_for_task(task);
      sp.seed = seed * 1000003ULL + static_cast<std::uint64_t>(p) * 101ULL + static_cast<std::uint64_t>(task);
      sp.flight_s = task == TaskCode::RJT ? hop_flight : flight;
      sp.contact_s = hop_contact;
      sp.concentric_s = concentric;
      sp.amplitude_m = amplitude;
      sp.rom_deg = rom;
      const auto out = generate(sp);
      FixtureOptions fo;
      fo.participant_id = pid;
      fo.task = task;
      fo.height_m = sp.stature_m;
      fo.write_omc = ground_truth_device(task) == Device::omc;
      fo.write_forceplate = ground_truth_device(task) == Device::forceplate;
      const auto sub = dir / fmt::format("{}_{}", pid, to_string(task));
      auto path = write_fixture(out, sp, fo, sub);
      if (task == TaskCode::OHP) {
        // The barbell is measured by hand in the image.
        auto m = parse_manifest(path);
        m.object_len_px = *m.object_len_px * bar_error;
        write_manifest(m, path);
      }
      manifests.push_back(path);
    }
  }
  return manifests;
}

}  // namespace mmc
