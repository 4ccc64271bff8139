// Torque laws: base-induced and wrench-responsive EE accelerations, the
// minimum-norm compensation torque, the operational-space tracking law, and
// the low-level joint PD loop.
#pragma once

#include <span>

#include "armstab/disturbance.hpp"
#include "armstab/dynamics.hpp"

namespace armstab {

struct TaskCommand {
  Pose x_des;
  Vec6 xdot_des = Vec6::Zero();
};

struct Gains {
  Vec6 kp_op = 100.0 * Vec6::Ones();  // operational stiffness
  Vec6 kd_op = 20.0 * Vec6::Ones();   // operational damping
  double kp = 10.0;                   // joint PD
  double kd = 0.5;
};

// [position error; orientation error as rotation vector], base frame.
inline Vec6 pose_error(const Pose& x_des, const Pose& x) {
  Vec6 e;
  e << x_des.position - x.position, orientation_error(x_des.orientation, x.orientation);
  return e;
}

// EE acceleration induced by base motion alone. The linear part is the point
// transport formula; the angular part is the rigid-transport term wdot_b.
inline Vec6 base_induced_accel(const Vec3& r_ee_loc, const Vec3& v_ee_loc,
                               const BaseMotionSample& motion) {
  const Vec3 w = motion.omega_b();
  Vec6 a;
  a.head<3>() = motion.vdot_b() + 2.0 * w.cross(v_ee_loc) + w.cross(w.cross(r_ee_loc)) +
                motion.omegadot_b().cross(r_ee_loc);
  a.tail<3>() = motion.omegadot_b();
  return a;
}

// Local responsive EE acceleration of the fictitious wrenches:
// J M^-1 sum_i J_i^T w_i.
inline Vec6 responsive_accel(const ChainModel& model, const FkResult& fk, const MatX& M,
                             std::span<const Wrench> wrenches) {
  const int n = model.dof();
  if (static_cast<int>(wrenches.size()) != n)
    throw std::invalid_argument("responsive_accel: wrench list must have one entry per link");
  VecX tau_w = VecX::Zero(n);
  for (int i = 0; i < n; ++i)
    tau_w += jacobian(model, fk, BodyRef::link(i)).transpose() * wrenches[i].stacked();
  return jacobian(model, fk, BodyRef::end_effector()) * M.llt().solve(tau_w);
}

inline Vec6 responsive_accel(const ChainModel& model, const VecX& q,
                             std::span<const Wrench> wrenches) {
  const FkResult fk = forward_kinematics(model, q);
  return responsive_accel(model, fk, mass_matrix(model, fk), wrenches);
}

// Minimum-norm compensation torque -J^T Lambda (a_base + a_resp); applied on
// top of bias-compensating control it cancels the disturbance-induced EE
// acceleration on the reachable subspace.
inline VecX compensation_torque(const ChainModel& model, const JointState& state,
                                const BaseMotionSample& motion, std::span<const Wrench> wrenches,
                                double lambda_reg = kDefaultLambdaReg) {
  const FkResult fk = forward_kinematics(model, state.q);
  const MatX M = mass_matrix(model, fk);
  const Vec6 tw = ee_twist(model, fk, state.qd);
  const Vec6 a_base = base_induced_accel(fk.ee.position, tw.head<3>(), motion);
  const Vec6 a_resp = responsive_accel(model, fk, M, wrenches);
  const Mat6 Lambda = operational_space_inertia(model, fk, M, BodyRef::end_effector(), lambda_reg);
  const Mat6X J = jacobian(model, fk, BodyRef::end_effector());
  return -J.transpose() * (Lambda * (a_base + a_resp));
}

// Operational-space tracking law:
// tau = J^T [ Lambda (Kp ex + Kd ev) + Q(q, qd) + G(q) ].
inline VecX task_torque(const ChainModel& model, const JointState& state, const TaskCommand& cmd,
                        const Gains& gains, const Vec3& gravity = kDefaultGravity,
                        double lambda_reg = kDefaultLambdaReg) {
  const DynamicsQuantities dyn = dynamics_quantities(model, state, gravity, lambda_reg);
  const FkResult fk = forward_kinematics(model, state.q);
  const Mat6X J = jacobian(model, fk, BodyRef::end_effector());
  const Vec6 ex = pose_error(cmd.x_des, fk.ee);
  const Vec6 ev = cmd.xdot_des - J * state.qd;
  const Vec6 f = dyn.Lambda * (gains.kp_op.asDiagonal() * ex + gains.kd_op.asDiagonal() * ev) +
                 dyn.Q_op + dyn.G_op;
  return J.transpose() * f;
}

// Joint PD with zero target velocity.
inline VecX pd_torque(const Gains& gains, const VecX& q_des, const JointState& state) {
  if (q_des.size() != state.q.size())
    throw std::invalid_argument("pd_torque: target length mismatch");
  return gains.kp * (q_des - state.q) - gains.kd * state.qd;
}

inline VecX clip_to_torque_limits(const ChainModel& model, VecX tau, bool* clipped = nullptr) {
  bool any = false;
  for (int i = 0; i < model.dof(); ++i) {
    const double lim = model.joints[i].torque_limit;
    if (std::abs(tau(i)) > lim) {
      tau(i) = std::clamp(tau(i), -lim, lim);
      any = true;
    }
  }
  if (clipped) *clipped = any;
  return tau;
}

struct IdealTorque {
  VecX tau;
  bool clipped = false;
};

// tau_comp + tau_task, clipped to the per-joint limits. The two terms can be
// zeroed independently for ablation runs.
inline IdealTorque ideal_controller(const ChainModel& model, const JointState& state,
                                    const BaseMotionSample& motion,
                                    std::span<const Wrench> wrenches, const TaskCommand& cmd,
                                    const Gains& gains, const Vec3& gravity = kDefaultGravity,
                                    bool use_comp = true, bool use_task = true,
                                    double lambda_reg = kDefaultLambdaReg) {
  VecX tau = VecX::Zero(model.dof());
  if (use_comp) tau += compensation_torque(model, state, motion, wrenches, lambda_reg);
  if (use_task) tau += task_torque(model, state, cmd, gains, gravity, lambda_reg);
  IdealTorque out;
  out.tau = clip_to_torque_limits(model, std::move(tau), &out.clipped);
  return out;
}

// Damped least-squares IK used to fix joint targets for the PD-hold baseline
// and the policy's nominal posture.
inline VecX dls_ik(const ChainModel& model, const Pose& target, VecX q, int max_iters = 200,
                   double damping = 1e-4, double tol = 1e-12) {
  for (int it = 0; it < max_iters; ++it) {
    const FkResult fk = forward_kinematics(model, q);
    const Vec6 e = pose_error(target, fk.ee);
    if (e.squaredNorm() < tol) break;
    const Mat6X J = jacobian(model, fk, BodyRef::end_effector());
    const Mat6 JJt = J * J.transpose() + damping * Mat6::Identity();
    q += J.transpose() * JJt.ldlt().solve(e);
    for (int i = 0; i < model.dof(); ++i)
      q(i) = std::clamp(q(i), model.joints[i].position_lower, model.joints[i].position_upper);
  }
  return q;
}

}  // namespace armstab
