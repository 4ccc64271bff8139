// Locomotion-like base-motion synthesis and the fictitious wrenches that
// emulate it on a fixed-base arm.
//
// A disturbance profile superposes, per component k, a periodic train of
// Gaussian impulses (foot strikes, centers at integer multiples of T_k, unit
// peak) and a sinusoidal sway:
//   A_b(t) = sum_k [ p_k g(t; T_k) + s_k sin(2 pi t / T_k + phi_k) ]
// The base twist is obtained by trapezoidal integration with V_b(0) = 0.
#pragma once

#include <string>
#include <vector>

#include "armstab/keyval.hpp"
#include "armstab/kinematics.hpp"

namespace armstab {

struct BaseMotionSample {
  Vec6 V_b = Vec6::Zero();  // [v_b; w_b]
  Vec6 A_b = Vec6::Zero();  // [vdot_b; wdot_b]

  Vec3 v_b() const { return V_b.head<3>(); }
  Vec3 omega_b() const { return V_b.tail<3>(); }
  Vec3 vdot_b() const { return A_b.head<3>(); }
  Vec3 omegadot_b() const { return A_b.tail<3>(); }

  MotionSeed seed() const { return {v_b(), vdot_b(), omega_b(), omegadot_b()}; }
};

struct DisturbanceComponent {
  double period = 1.0;       // T_k, s
  Vec6 impulse = Vec6::Zero();  // p_k
  Vec6 sway = Vec6::Zero();     // s_k
  double phase = 0.0;        // phi_k, rad
};

struct DisturbanceProfile {
  std::vector<DisturbanceComponent> components;
  double impulse_std = 0.01;  // s
  std::uint64_t seed = 0;
};

struct SampleRanges {
  double period_lo = 0.64, period_hi = 1.28;     // log-uniform
  double impulse_lo = -100.0, impulse_hi = 100.0;
  double sway_lo = -10.0, sway_hi = 10.0;
  double phase_lo = -kPi, phase_hi = kPi;
  int components = 3;
  double impulse_std = 0.01;

  void check() const {
    auto ok = [](double lo, double hi) { return lo < hi && std::isfinite(lo) && std::isfinite(hi); };
    if (!ok(period_lo, period_hi) || period_lo <= 0.0)
      throw std::invalid_argument("sample ranges: bad period range");
    if (!ok(impulse_lo, impulse_hi) || !ok(sway_lo, sway_hi) || !ok(phase_lo, phase_hi))
      throw std::invalid_argument("sample ranges: lo must be below hi");
    if (components < 1) throw std::invalid_argument("sample ranges: need at least one component");
    if (!(impulse_std > 0.0)) throw std::invalid_argument("sample ranges: impulse std must be positive");
  }
};

inline DisturbanceProfile sample_profile(std::uint64_t seed, const SampleRanges& ranges = {}) {
  ranges.check();
  CounterRng rng(seed, 0xd157u);
  DisturbanceProfile p;
  p.seed = seed;
  p.impulse_std = ranges.impulse_std;
  p.components.resize(ranges.components);
  for (DisturbanceComponent& c : p.components) {
    c.period = rng.log_uniform(ranges.period_lo, ranges.period_hi);
    for (int i = 0; i < 6; ++i) c.impulse(i) = rng.uniform(ranges.impulse_lo, ranges.impulse_hi);
    for (int i = 0; i < 6; ++i) c.sway(i) = rng.uniform(ranges.sway_lo, ranges.sway_hi);
    c.phase = rng.uniform(ranges.phase_lo, ranges.phase_hi);
  }
  return p;
}

// Componentwise shaping of a sampled profile onto the axes a given arm can
// actually respond to (task definition, not part of the sampling ranges).
inline DisturbanceProfile scale_profile_axes(DisturbanceProfile profile, const Vec6& axis_scale) {
  for (DisturbanceComponent& c : profile.components) {
    c.impulse = c.impulse.cwiseProduct(axis_scale);
    c.sway = c.sway.cwiseProduct(axis_scale);
  }
  return profile;
}

// Unit-peak Gaussian impulse train with centers at j*T, j >= 0.
inline double impulse_train(double t, double period, double std_dev) {
  const double jc = std::round(t / period);
  double g = 0.0;
  for (double j = std::max(0.0, jc - 1.0); j <= jc + 1.0; j += 1.0) {
    const double dt = t - j * period;
    g += std::exp(-0.5 * dt * dt / (std_dev * std_dev));
  }
  return g;
}

inline Vec6 eval_accel(const DisturbanceProfile& profile, double t) {
  Vec6 a = Vec6::Zero();
  for (const DisturbanceComponent& c : profile.components) {
    a += c.impulse * impulse_train(t, c.period, profile.impulse_std);
    a += c.sway * std::sin(2.0 * kPi * t / c.period + c.phase);
  }
  return a;
}

// Trapezoidal integration of A_b into V_b on a uniform grid starting at t=0.
inline std::vector<BaseMotionSample> integrate_twist(const DisturbanceProfile& profile,
                                                     int steps, double dt) {
  std::vector<BaseMotionSample> out(static_cast<size_t>(steps) + 1);
  out[0].A_b = eval_accel(profile, 0.0);
  for (int k = 1; k <= steps; ++k) {
    out[k].A_b = eval_accel(profile, k * dt);
    out[k].V_b = out[k - 1].V_b + 0.5 * dt * (out[k - 1].A_b + out[k].A_b);
  }
  return out;
}

// Per-link kinematic state consumed by the wrench formula: COM position and
// velocity relative to the base (base frame), world-aligned inertia about the
// COM, and the link's angular velocity relative to the base. A link at rest
// relative to the base (omega = 0) reduces to the pure rigid-transport form.
struct LinkKinState {
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();  // about COM, base-frame axes
  Vec3 com_pos = Vec3::Zero();      // r
  Vec3 com_vel = Vec3::Zero();      // v
  Vec3 omega = Vec3::Zero();        // link angular velocity rel. base
};

// Inertial force and torque a moving base induces on one link, applied at
// the link COM. Force terms: linear, Euler, centrifugal, Coriolis. Torque
// terms: angular-acceleration, gyroscopic, plus the relative-rotation
// coupling that makes the fixed-base emulation exact for a moving link.
inline Wrench fictitious_wrench(const LinkKinState& link, const BaseMotionSample& motion) {
  const Vec3 w = motion.omega_b();
  const Vec3 dw = motion.omegadot_b();
  const Vec3& r = link.com_pos;
  const Vec3& v = link.com_vel;
  const Mat3& I = link.inertia;

  Wrench out;
  out.force = link.mass * (-motion.vdot_b() - dw.cross(r) - w.cross(w.cross(r)) -
                           2.0 * w.cross(v));
  out.torque = -I * dw - w.cross(I * w) -
               (I * w.cross(link.omega) + w.cross(I * link.omega) + link.omega.cross(I * w));
  return out;
}

// Wrench list for every link of the chain at the given state.
inline std::vector<Wrench> fictitious_wrenches(const ChainModel& model, const FkResult& fk,
                                               const ChainMotion& motion,
                                               const BaseMotionSample& base) {
  std::vector<Wrench> out(model.dof());
  for (int i = 0; i < model.dof(); ++i) {
    LinkKinState lk;
    lk.mass = model.links[i].mass;
    const Mat3 R = fk.link_rotations[i];
    lk.inertia = R * model.links[i].inertia * R.transpose();
    lk.com_pos = fk.com_positions[i];
    lk.com_vel = motion.v_com[i];
    lk.omega = motion.omega[i];
    out[i] = fictitious_wrench(lk, base);
  }
  return out;
}

// --- profile serialization (one component per line) ---

inline std::string serialize_profile(const DisturbanceProfile& p) {
  std::string s;
  s += "seed = " + std::to_string(p.seed) + "\n";
  s += "impulse_std = " + fmt_double(p.impulse_std) + "\n";
  for (const DisturbanceComponent& c : p.components) {
    s += "component = " + fmt_double(c.period);
    for (int i = 0; i < 6; ++i) s += ", " + fmt_double(c.impulse(i));
    for (int i = 0; i < 6; ++i) s += ", " + fmt_double(c.sway(i));
    s += ", " + fmt_double(c.phase) + "\n";
  }
  return s;
}

inline DisturbanceProfile parse_profile(const std::string& text) {
  DisturbanceProfile p;
  for (const KvEntry& e : scan_keyval(text)) {
    if (e.is_section) throw ParseError(e.line, 1, "profile files have no sections");
    if (e.key == "seed") {
      p.seed = static_cast<std::uint64_t>(parse_scalar(e.value, e.line));
    } else if (e.key == "impulse_std") {
      p.impulse_std = parse_scalar(e.value, e.line);
    } else if (e.key == "component") {
      auto v = parse_number_list(e.value, e.line);
      if (v.size() != 14)
        throw ParseError(e.line, 1, "'component' needs 14 numbers (T, p[6], s[6], phi)");
      DisturbanceComponent c;
      c.period = v[0];
      for (int i = 0; i < 6; ++i) c.impulse(i) = v[1 + i];
      for (int i = 0; i < 6; ++i) c.sway(i) = v[7 + i];
      c.phase = v[13];
      p.components.push_back(c);
    } else {
      throw ParseError(e.line, 1, "unknown key '" + e.key + "' in profile file");
    }
  }
  if (p.components.empty()) throw ParseError(1, 1, "profile has no components");
  if (!(p.impulse_std > 0.0)) throw ParseError(1, 1, "impulse_std must be positive");
  return p;
}

}  // namespace armstab
