// Fixed-base time stepping under fictitious wrenches, full rollouts with
// rate-layered controllers, and the floating-base kinematic oracle.
//
// Rate layering: the physics integrator runs at dt_physics; wrenches are
// refreshed every physics step; controllers are queried for high-level
// updates at control_rate and for torque at their declared rate (analytic
// torque laws default to the physics rate, PD-style controllers to pd_rate).
// Logged quantities are ground truth; observation noise only ever corrupts
// what controllers see.
#pragma once

#include <array>
#include <cctype>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "armstab/control.hpp"

namespace armstab {

struct SimConfig {
  double dt_physics = 1e-3;   // s
  double control_rate = 50.0;  // Hz
  double pd_rate = 500.0;      // Hz
  double duration = 5.0;       // s
  Vec3 gravity = kDefaultGravity;
  double obs_noise_std = 0.0;  // per-channel, controller inputs only
  bool torque_limits_on = true;
  std::uint64_t seed = 0;

  int steps() const { return static_cast<int>(std::llround(duration / dt_physics)); }

  int steps_per_control() const {
    return static_cast<int>(std::llround(1.0 / (control_rate * dt_physics)));
  }
  int steps_per_pd() const {
    return static_cast<int>(std::llround(1.0 / (pd_rate * dt_physics)));
  }

  void check() const {
    if (!(duration >= 0.0)) throw std::invalid_argument("sim config: duration must be >= 0");
    if (!(dt_physics > 0.0)) throw std::invalid_argument("sim config: dt_physics must be > 0");
    if (dt_physics > 1.0 / pd_rate + 1e-12 || 1.0 / pd_rate > 1.0 / control_rate + 1e-12)
      throw std::invalid_argument("sim config: need dt_physics <= 1/pd_rate <= 1/control_rate");
    auto integral = [](double x) { return std::abs(x - std::round(x)) < 1e-9; };
    if (!integral(1.0 / (control_rate * dt_physics)) || !integral(1.0 / (pd_rate * dt_physics)))
      throw std::invalid_argument("sim config: rates must divide the physics rate");
  }
};

struct SimRecord {
  double t = 0.0;
  VecX q, qd, tau;    // tau = torque actually applied (after clipping)
  Pose ee;
  Vec6 a_loc = Vec6::Zero();   // J qdd + Jdot qd
  Vec6 a_base = Vec6::Zero();  // base-induced EE acceleration
  Vec6 a_glob = Vec6::Zero();  // a_base + a_loc
  Vec6 V_b = Vec6::Zero();
  Vec6 A_b = Vec6::Zero();
};

struct RolloutLog {
  int dof = 0;
  std::vector<SimRecord> records;
};

class RolloutAbort : public std::runtime_error {
 public:
  RolloutAbort(double t, const std::string& what)
      : std::runtime_error("rollout aborted at t=" + fmt_double(t) + ": " + what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

// Semi-implicit update with joint-limit clamping (velocity zeroed on clamp).
inline JointState integrate_semi_implicit(const ChainModel& model, const JointState& state,
                                          const VecX& qdd, double dt) {
  JointState next;
  next.qd = state.qd + dt * qdd;
  next.q = state.q + dt * next.qd;
  for (int i = 0; i < model.dof(); ++i) {
    const JointSpec& j = model.joints[i];
    if (next.q(i) < j.position_lower) {
      next.q(i) = j.position_lower;
      next.qd(i) = 0.0;
    } else if (next.q(i) > j.position_upper) {
      next.q(i) = j.position_upper;
      next.qd(i) = 0.0;
    }
  }
  return next;
}

inline JointState step(const ChainModel& model, const JointState& state, const VecX& tau,
                       std::span<const Wrench> wrenches, double dt,
                       const Vec3& gravity = kDefaultGravity) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const VecX qdd = forward_dynamics(model, state, tau, wrenches, gravity);
  if (!qdd.allFinite()) throw RolloutAbort(0.0, "non-finite dynamics output");
  return integrate_semi_implicit(model, state, qdd, dt);
}

// What a controller sees at query time. State and IMU channels may carry
// observation noise; wrenches and command are exact.
struct CtrlContext {
  const ChainModel* model = nullptr;
  double t = 0.0;
  double dt = 0.0;
  JointState state;
  BaseMotionSample motion;
  std::span<const Wrench> wrenches;
  const TaskCommand* cmd = nullptr;
  Vec3 gravity = kDefaultGravity;
};

class Controller {
 public:
  enum class Rate { physics, pd, control };

  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual Rate rate() const { return Rate::physics; }
  virtual void reset(const ChainModel& model, const TaskCommand& cmd, const VecX& q0,
                     std::uint64_t seed) {}
  // called once per control-rate tick, before any torque query of that step
  virtual void control_update(const CtrlContext&) {}
  virtual VecX torque(const CtrlContext&) = 0;
};

// IK-stand-in baseline: joint PD holding the target posture solved once.
class PdHoldController : public Controller {
 public:
  explicit PdHoldController(Gains gains = {}) : gains_(gains) {}
  std::string name() const override { return "pd_hold"; }
  Rate rate() const override { return Rate::pd; }
  void reset(const ChainModel& model, const TaskCommand& cmd, const VecX& q0,
             std::uint64_t) override {
    q_hold_ = dls_ik(model, cmd.x_des, q0);
  }
  VecX torque(const CtrlContext& ctx) override { return pd_torque(gains_, q_hold_, ctx.state); }

 private:
  Gains gains_;
  VecX q_hold_;
};

class TaskOnlyController : public Controller {
 public:
  explicit TaskOnlyController(Gains gains = {}, Rate rate = Rate::physics)
      : gains_(gains), rate_(rate) {}
  std::string name() const override { return "task_only"; }
  Rate rate() const override { return rate_; }
  VecX torque(const CtrlContext& ctx) override {
    return task_torque(*ctx.model, ctx.state, *ctx.cmd, gains_, ctx.gravity);
  }

 private:
  Gains gains_;
  Rate rate_;
};

// Analytic compensation plus operational-space tracking; terms can be zeroed
// for ablations.
class IdealController : public Controller {
 public:
  explicit IdealController(Gains gains = {}, bool use_comp = true, bool use_task = true,
                           Rate rate = Rate::physics)
      : gains_(gains), use_comp_(use_comp), use_task_(use_task), rate_(rate) {}
  std::string name() const override {
    if (use_comp_ && use_task_) return "ideal";
    return use_comp_ ? "comp_only" : "task_only";
  }
  Rate rate() const override { return rate_; }
  VecX torque(const CtrlContext& ctx) override {
    return ideal_controller(*ctx.model, ctx.state, ctx.motion, ctx.wrenches, *ctx.cmd, gains_,
                            ctx.gravity, use_comp_, use_task_)
        .tau;
  }

 private:
  Gains gains_;
  bool use_comp_;
  bool use_task_;
  Rate rate_;
};

// Base motion as seen by the fixed-base emulation.
class MotionSource {
 public:
  virtual ~MotionSource() = default;
  virtual BaseMotionSample at_step(int k, double dt) const = 0;
};

class ProfileMotion : public MotionSource {
 public:
  ProfileMotion(const DisturbanceProfile& profile, int steps, double dt)
      : series_(integrate_twist(profile, steps, dt)) {}
  BaseMotionSample at_step(int k, double) const override { return series_.at(k); }

 private:
  std::vector<BaseMotionSample> series_;
};

class ZeroMotion : public MotionSource {
 public:
  BaseMotionSample at_step(int, double) const override { return {}; }
};

namespace detail {

inline void add_obs_noise(CtrlContext& ctx, double std_dev, std::uint64_t seed, int step) {
  if (std_dev <= 0.0) return;
  CounterRng rng(seed, 0x0b5e7ull, static_cast<std::uint64_t>(step));
  for (int i = 0; i < ctx.state.q.size(); ++i) ctx.state.q(i) += std_dev * rng.normal();
  for (int i = 0; i < ctx.state.qd.size(); ++i) ctx.state.qd(i) += std_dev * rng.normal();
  for (int i = 0; i < 3; ++i) ctx.motion.A_b(i) += std_dev * rng.normal();      // vdot_b
  for (int i = 3; i < 6; ++i) ctx.motion.V_b(i) += std_dev * rng.normal();      // omega_b
}

struct StepEval {
  FkResult fk;
  ChainMotion cm;          // relative motion, qdd = 0
  std::vector<Wrench> wrenches;
  MatX M;
  VecX bias_fixed;
};

inline StepEval eval_step(const ChainModel& model, const JointState& state,
                          const BaseMotionSample& motion, const Vec3& gravity) {
  StepEval ev;
  ev.fk = forward_kinematics(model, state.q);
  ev.cm = chain_motion(model, ev.fk, state.qd, VecX::Zero(model.dof()));
  ev.wrenches = fictitious_wrenches(model, ev.fk, ev.cm, motion);
  ev.M = mass_matrix(model, ev.fk);
  ev.bias_fixed = inverse_dynamics(model, state.q, state.qd, VecX::Zero(model.dof()), {},
                                   gravity, true);
  return ev;
}

}  // namespace detail

// Rollout of the fixed-base emulation under a controller. Deterministic for
// a fixed (model, controller, motion, cmd, config) tuple.
inline RolloutLog rollout(const ChainModel& model, Controller& controller,
                          const MotionSource& motion_source, const TaskCommand& cmd,
                          const SimConfig& config, const VecX& q0) {
  config.check();
  const int n = model.dof();
  const int steps = config.steps();
  const double dt = config.dt_physics;
  const int spc = config.steps_per_control();
  const int spp = config.steps_per_pd();

  RolloutLog log;
  log.dof = n;
  log.records.reserve(steps + 1);

  JointState state{q0, VecX::Zero(n)};
  controller.reset(model, cmd, q0, config.seed);
  VecX tau_latch = VecX::Zero(n);

  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const BaseMotionSample motion = motion_source.at_step(k, dt);
    const auto ev = detail::eval_step(model, state, motion, config.gravity);

    CtrlContext ctx;
    ctx.model = &model;
    ctx.t = t;
    ctx.dt = dt;
    ctx.state = state;
    ctx.motion = motion;
    ctx.wrenches = ev.wrenches;
    ctx.cmd = &cmd;
    ctx.gravity = config.gravity;
    detail::add_obs_noise(ctx, config.obs_noise_std, config.seed, k);

    if (k % spc == 0) controller.control_update(ctx);
    const bool refresh = controller.rate() == Controller::Rate::physics ||
                         (controller.rate() == Controller::Rate::pd && k % spp == 0) ||
                         (controller.rate() == Controller::Rate::control && k % spc == 0);
    if (refresh) tau_latch = controller.torque(ctx);
    VecX tau = tau_latch;
    if (config.torque_limits_on) tau = clip_to_torque_limits(model, std::move(tau));

    VecX rhs = tau - ev.bias_fixed;
    const Mat6X J_ee = jacobian(model, ev.fk, BodyRef::end_effector());
    for (int i = 0; i < n; ++i)
      rhs += jacobian(model, ev.fk, BodyRef::link(i)).transpose() * ev.wrenches[i].stacked();
    const VecX qdd = ev.M.llt().solve(rhs);
    if (!qdd.allFinite() || !state.q.allFinite())
      throw RolloutAbort(t, "non-finite dynamics output");

    SimRecord rec;
    rec.t = t;
    rec.q = state.q;
    rec.qd = state.qd;
    rec.tau = tau;
    rec.ee = ev.fk.ee;
    Vec6 jdqd;
    jdqd << ev.cm.a_ee, ev.cm.alpha.back();
    rec.a_loc = J_ee * qdd + jdqd;
    rec.a_base = base_induced_accel(ev.fk.ee.position, ev.cm.v_ee, motion);
    rec.a_glob = rec.a_base + rec.a_loc;
    rec.V_b = motion.V_b;
    rec.A_b = motion.A_b;
    log.records.push_back(std::move(rec));

    if (k == steps) break;
    state = integrate_semi_implicit(model, state, qdd, dt);
  }
  return log;
}

inline RolloutLog rollout(const ChainModel& model, Controller& controller,
                          const DisturbanceProfile& profile, const TaskCommand& cmd,
                          const SimConfig& config, const VecX& q0) {
  config.check();
  ProfileMotion motion(profile, config.steps(), config.dt_physics);
  return rollout(model, controller, motion, cmd, config, q0);
}

// Smooth analytic base trajectory: per-axis sinusoidal translation plus a
// fixed-axis sinusoidal rotation, so velocities and accelerations are exact.
struct SineTerm {
  double amp = 0.0;
  double omega = 0.0;  // rad/s
  double phase = 0.0;
};

struct BaseTrajectory {
  std::array<std::vector<SineTerm>, 3> translation;
  Vec3 rotation_axis = Vec3::UnitZ();
  std::vector<SineTerm> rotation;

  struct Sample {
    Mat3 R = Mat3::Identity();  // world <- base
    Vec3 x = Vec3::Zero();      // base origin, world frame
    BaseMotionSample motion;    // V_b / A_b in base coordinates
  };

  Sample eval(double t) const {
    auto series = [t](const std::vector<SineTerm>& terms, double& p, double& v, double& a) {
      p = v = a = 0.0;
      for (const SineTerm& s : terms) {
        const double ph = s.omega * t + s.phase;
        p += s.amp * std::sin(ph);
        v += s.amp * s.omega * std::cos(ph);
        a -= s.amp * s.omega * s.omega * std::sin(ph);
      }
    };

    Sample out;
    Vec3 xd, xdd;
    for (int i = 0; i < 3; ++i) series(translation[i], out.x(i), xd(i), xdd(i));
    double theta, thetad, thetadd;
    series(rotation, theta, thetad, thetadd);
    out.R = Eigen::AngleAxisd(theta, rotation_axis).toRotationMatrix();
    // the rotation axis is invariant under R, so angular terms need no rotation
    out.motion.V_b << out.R.transpose() * xd, rotation_axis * thetad;
    out.motion.A_b << out.R.transpose() * xdd, rotation_axis * thetadd;
    return out;
  }

  // Rotation about the gravity axis keeps base-frame gravity constant, which
  // is the regime the fixed-base emulation models.
  static BaseTrajectory random_smooth(std::uint64_t seed, double trans_amp = 0.08,
                                      double rot_amp = 0.15, double freq_lo = 0.4,
                                      double freq_hi = 1.2, Vec3 axis = Vec3::UnitZ()) {
    CounterRng rng(seed, 0x7247ull);
    BaseTrajectory traj;
    traj.rotation_axis = axis.normalized();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 2; ++j) {
        SineTerm s;
        s.amp = rng.uniform(0.3, 1.0) * trans_amp;
        s.omega = 2.0 * kPi * rng.uniform(freq_lo, freq_hi);
        s.phase = rng.uniform(-kPi, kPi);
        traj.translation[i].push_back(s);
      }
    }
    SineTerm r;
    r.amp = rng.uniform(0.3, 1.0) * rot_amp;
    r.omega = 2.0 * kPi * rng.uniform(freq_lo, freq_hi);
    r.phase = rng.uniform(-kPi, kPi);
    traj.rotation.push_back(r);
    return traj;
  }
};

class TrajectoryMotion : public MotionSource {
 public:
  explicit TrajectoryMotion(const BaseTrajectory& traj) : traj_(traj) {}
  BaseMotionSample at_step(int k, double dt) const override {
    return traj_.eval(k * dt).motion;
  }

 private:
  BaseTrajectory traj_;
};

// Ground-truth plant for the equivalence claim: the arm's base is moved
// kinematically (no back-coupling) and joint dynamics are solved directly in
// the moving frame via the seeded Newton-Euler pass. EE poses are logged in
// the world frame; accelerations stay in base coordinates so records compare
// directly against the fixed-base emulation.
inline RolloutLog floating_base_oracle(const ChainModel& model, const BaseTrajectory& traj,
                                       Controller& controller, const TaskCommand& cmd,
                                       const SimConfig& config, const VecX& q0) {
  config.check();
  const int n = model.dof();
  const int steps = config.steps();
  const double dt = config.dt_physics;
  const int spc = config.steps_per_control();
  const int spp = config.steps_per_pd();

  RolloutLog log;
  log.dof = n;
  log.records.reserve(steps + 1);

  JointState state{q0, VecX::Zero(n)};
  controller.reset(model, cmd, q0, config.seed);
  VecX tau_latch = VecX::Zero(n);

  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const BaseTrajectory::Sample base = traj.eval(t);
    const BaseMotionSample& motion = base.motion;
    const Vec3 gravity_base = base.R.transpose() * config.gravity;
    const auto ev = detail::eval_step(model, state, motion, gravity_base);

    CtrlContext ctx;
    ctx.model = &model;
    ctx.t = t;
    ctx.dt = dt;
    ctx.state = state;
    ctx.motion = motion;
    ctx.wrenches = ev.wrenches;
    ctx.cmd = &cmd;
    ctx.gravity = gravity_base;
    detail::add_obs_noise(ctx, config.obs_noise_std, config.seed, k);

    if (k % spc == 0) controller.control_update(ctx);
    const bool refresh = controller.rate() == Controller::Rate::physics ||
                         (controller.rate() == Controller::Rate::pd && k % spp == 0) ||
                         (controller.rate() == Controller::Rate::control && k % spc == 0);
    if (refresh) tau_latch = controller.torque(ctx);
    VecX tau = tau_latch;
    if (config.torque_limits_on) tau = clip_to_torque_limits(model, std::move(tau));

    // Joint dynamics in the moving frame: M(q) qdd + bias_moving = tau.
    const VecX bias_moving = inverse_dynamics(model, state.q, state.qd, VecX::Zero(n), {},
                                              gravity_base, true, motion.seed());
    const VecX qdd = ev.M.llt().solve(tau - bias_moving);
    if (!qdd.allFinite() || !state.q.allFinite())
      throw RolloutAbort(t, "non-finite dynamics output");

    // True world EE acceleration (base coordinates) via the seeded recursion.
    const ChainMotion world = chain_motion(model, ev.fk, state.qd, qdd, motion.seed());

    SimRecord rec;
    rec.t = t;
    rec.q = state.q;
    rec.qd = state.qd;
    rec.tau = tau;
    rec.ee.position = base.x + base.R * ev.fk.ee.position;
    rec.ee.orientation = Quat(base.R * ev.fk.ee.orientation.toRotationMatrix()).normalized();
    const Mat6X J_ee = jacobian(model, ev.fk, BodyRef::end_effector());
    Vec6 jdqd;
    jdqd << ev.cm.a_ee, ev.cm.alpha.back();
    rec.a_loc = J_ee * qdd + jdqd;
    rec.a_base = base_induced_accel(ev.fk.ee.position, ev.cm.v_ee, motion);
    rec.a_glob.head<3>() = world.a_ee;
    rec.a_glob.tail<3>() = rec.a_base.tail<3>() + rec.a_loc.tail<3>();
    rec.V_b = motion.V_b;
    rec.A_b = motion.A_b;
    log.records.push_back(std::move(rec));

    if (k == steps) break;
    state = integrate_semi_implicit(model, state, qdd, dt);
  }
  return log;
}

// Recompute a_glob from a logged record (state, applied torque, base motion).
inline Vec6 global_ee_accel(const ChainModel& model, const SimRecord& rec,
                            const Vec3& gravity = kDefaultGravity) {
  BaseMotionSample motion;
  motion.V_b = rec.V_b;
  motion.A_b = rec.A_b;
  const JointState state{rec.q, rec.qd};
  const auto ev = detail::eval_step(model, state, motion, gravity);

  VecX rhs = rec.tau - ev.bias_fixed;
  for (int i = 0; i < model.dof(); ++i)
    rhs += jacobian(model, ev.fk, BodyRef::link(i)).transpose() * ev.wrenches[i].stacked();
  const VecX qdd = ev.M.llt().solve(rhs);

  Vec6 jdqd;
  jdqd << ev.cm.a_ee, ev.cm.alpha.back();
  const Vec6 a_loc = jacobian(model, ev.fk, BodyRef::end_effector()) * qdd + jdqd;
  return base_induced_accel(ev.fk.ee.position, ev.cm.v_ee, motion) + a_loc;
}

// --- rollout log CSV (one row per physics step, documented column order) ---

inline std::string rollout_csv_header(int n) {
  std::string h = "t";
  auto cols = [&h, n](const std::string& base) {
    for (int i = 0; i < n; ++i) h += "," + base + std::to_string(i);
  };
  cols("q");
  cols("qd");
  cols("tau");
  h += ",ee_px,ee_py,ee_pz,ee_qw,ee_qx,ee_qy,ee_qz";
  for (const char* base : {"aloc", "abase", "aglob", "vb", "ab"})
    for (int i = 0; i < 6; ++i) h += "," + std::string(base) + std::to_string(i);
  return h;
}

inline std::string to_csv(const RolloutLog& log) {
  std::string s = rollout_csv_header(log.dof) + "\n";
  for (const SimRecord& r : log.records) {
    s += fmt_double(r.t);
    auto emit = [&s](const auto& v) {
      for (int i = 0; i < v.size(); ++i) s += "," + fmt_double(v(i));
    };
    emit(r.q);
    emit(r.qd);
    emit(r.tau);
    s += "," + fmt_double(r.ee.position.x()) + "," + fmt_double(r.ee.position.y()) + "," +
         fmt_double(r.ee.position.z());
    s += "," + fmt_double(r.ee.orientation.w()) + "," + fmt_double(r.ee.orientation.x()) + "," +
         fmt_double(r.ee.orientation.y()) + "," + fmt_double(r.ee.orientation.z());
    emit(r.a_loc);
    emit(r.a_base);
    emit(r.a_glob);
    emit(r.V_b);
    emit(r.A_b);
    s += "\n";
  }
  return s;
}

inline RolloutLog from_csv(const std::string& text) {
  RolloutLog log;
  size_t pos = text.find('\n');
  if (pos == std::string::npos) throw std::invalid_argument("rollout csv: missing header");
  const std::string header = text.substr(0, pos);
  // dof = number of q<i> columns before the qd block
  int n = 0;
  {
    size_t start = 0;
    while (start <= header.size()) {
      size_t comma = header.find(',', start);
      std::string tok = header.substr(start, (comma == std::string::npos ? header.size() : comma) - start);
      if (tok.size() >= 2 && tok[0] == 'q' && std::isdigit(static_cast<unsigned char>(tok[1])))
        ++n;
      if (tok.rfind("qd", 0) == 0) break;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (n == 0) throw std::invalid_argument("rollout csv: cannot determine dof from header");
  log.dof = n;

  const int expected = 1 + 3 * n + 7 + 30;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos + 1);
    std::string_view line(text.data() + pos + 1,
                          (eol == std::string::npos ? text.size() : eol) - pos - 1);
    pos = (eol == std::string::npos) ? text.size() : eol;
    if (line.empty()) continue;

    std::vector<double> v;
    v.reserve(expected);
    size_t start = 0;
    while (start <= line.size()) {
      size_t comma = line.find(',', start);
      std::string_view tok = line.substr(start, (comma == std::string_view::npos ? line.size() : comma) - start);
      double x;
      if (!parse_double(tok, x)) throw std::invalid_argument("rollout csv: bad number");
      v.push_back(x);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(v.size()) != expected)
      throw std::invalid_argument("rollout csv: wrong column count");

    SimRecord r;
    int c = 0;
    r.t = v[c++];
    r.q = VecX(n);
    r.qd = VecX(n);
    r.tau = VecX(n);
    for (int i = 0; i < n; ++i) r.q(i) = v[c++];
    for (int i = 0; i < n; ++i) r.qd(i) = v[c++];
    for (int i = 0; i < n; ++i) r.tau(i) = v[c++];
    r.ee.position = Vec3(v[c], v[c + 1], v[c + 2]);
    c += 3;
    r.ee.orientation = Quat(v[c], v[c + 1], v[c + 2], v[c + 3]);
    c += 4;
    for (Vec6* field : {&r.a_loc, &r.a_base, &r.a_glob, &r.V_b, &r.A_b})
      for (int i = 0; i < 6; ++i) (*field)(i) = v[c++];
    log.records.push_back(std::move(r));
  }
  return log;
}

}  // namespace armstab
