// Joint-space and operational-space dynamics.
//
// Inverse dynamics is a recursive Newton-Euler pass over the chain; the mass
// matrix comes from a composite-rigid-body accumulation. Both accept the
// base-motion seed from kinematics.hpp, which is how the floating-base
// oracle computes exact dynamics for a kinematically driven base.
//
// External wrenches are forces/torques applied at link COMs, so they enter
// the joint-space equations as J_i^T w_i:
//   M(q) qdd + bias(q, qd) = tau + sum_i J_i^T w_i
#pragma once

#include <span>
#include <vector>

#include "armstab/kinematics.hpp"

namespace armstab {

inline constexpr double kDefaultLambdaReg = 1e-6;
inline const Vec3 kDefaultGravity(0.0, 0.0, -9.81);

inline VecX inverse_dynamics(const ChainModel& model, const VecX& q, const VecX& qd,
                             const VecX& qdd, std::span<const Wrench> ext_wrenches,
                             const Vec3& gravity, bool include_damping = true,
                             const MotionSeed& base = {}) {
  const int n = model.dof();
  if (q.size() != n || qd.size() != n || qdd.size() != n)
    throw std::invalid_argument("inverse_dynamics: vector length mismatch");
  if (!ext_wrenches.empty() && static_cast<int>(ext_wrenches.size()) != n)
    throw std::invalid_argument("inverse_dynamics: wrench list must be empty or length n");

  const FkResult fk = forward_kinematics(model, q);

  // Classic trick: accelerating the base by -gravity makes every link feel
  // gravity without carrying a separate field term.
  MotionSeed seed = base;
  seed.a0 -= gravity;
  const ChainMotion motion = chain_motion(model, fk, qd, qdd, seed);

  VecX tau(n);
  Vec3 f_child = Vec3::Zero();
  Vec3 n_child = Vec3::Zero();  // about joint origin o_{i+1}
  Vec3 o_child = Vec3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Mat3 R = fk.link_rotations[i];
    const Mat3 I_w = R * model.links[i].inertia * R.transpose();

    Vec3 F = model.links[i].mass * motion.a_com[i];
    Vec3 N = I_w * motion.alpha[i] + motion.omega[i].cross(I_w * motion.omega[i]);
    if (!ext_wrenches.empty()) {
      F -= ext_wrenches[i].force;
      N -= ext_wrenches[i].torque;
    }

    const Vec3& o = fk.joint_origins[i];
    Vec3 n_here = N + (fk.com_positions[i] - o).cross(F) + n_child;
    if (i < n - 1) n_here += (o_child - o).cross(f_child);
    const Vec3 f_here = F + f_child;

    tau(i) = fk.joint_axes[i].dot(n_here);
    if (include_damping) tau(i) += model.joints[i].viscous_damping * qd(i);

    f_child = f_here;
    n_child = n_here;
    o_child = o;
  }
  return tau;
}

inline VecX bias_forces(const ChainModel& model, const VecX& q, const VecX& qd,
                        const Vec3& gravity, const MotionSeed& base = {}) {
  return inverse_dynamics(model, q, qd, VecX::Zero(model.dof()), {}, gravity, true, base);
}

inline VecX gravity_torque(const ChainModel& model, const VecX& q, const Vec3& gravity) {
  const int n = model.dof();
  return inverse_dynamics(model, q, VecX::Zero(n), VecX::Zero(n), {}, gravity, false);
}

// Coriolis/centrifugal torque only (no gravity, no damping).
inline VecX coriolis_torque(const ChainModel& model, const VecX& q, const VecX& qd) {
  return inverse_dynamics(model, q, qd, VecX::Zero(model.dof()), {}, Vec3::Zero(), false);
}

// Composite-rigid-body mass matrix in the base frame.
inline MatX mass_matrix(const ChainModel& model, const FkResult& fk) {
  const int n = model.dof();

  // Accumulate tip-side composites: mass, COM, inertia about the COM.
  std::vector<double> cm(n);
  std::vector<Vec3> cc(n);
  std::vector<Mat3> ci(n);
  for (int i = n - 1; i >= 0; --i) {
    const Mat3 R = fk.link_rotations[i];
    double m = model.links[i].mass;
    Vec3 c = fk.com_positions[i];
    Mat3 I = R * model.links[i].inertia * R.transpose();
    if (i < n - 1) {
      const double m2 = cm[i + 1];
      const Vec3 c2 = cc[i + 1];
      const Mat3 I2 = ci[i + 1];
      const double mt = m + m2;
      const Vec3 ct = (m * c + m2 * c2) / mt;
      const Vec3 d1 = c - ct;
      const Vec3 d2 = c2 - ct;
      I = I + m * (d1.squaredNorm() * Mat3::Identity() - d1 * d1.transpose()) + I2 +
          m2 * (d2.squaredNorm() * Mat3::Identity() - d2 * d2.transpose());
      m = mt;
      c = ct;
    }
    cm[i] = m;
    cc[i] = c;
    ci[i] = I;
  }

  MatX M = MatX::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    // Unit qdd_j at rest: the composite j..n-1 sees alpha = z_j and
    // a(com) = z_j x (c - o_j).
    const Vec3& z = fk.joint_axes[j];
    const Vec3 a_c = z.cross(cc[j] - fk.joint_origins[j]);
    const Vec3 F = cm[j] * a_c;
    const Vec3 N = ci[j] * z;
    for (int i = 0; i <= j; ++i) {
      const Vec3 torque_about_oi = N + (cc[j] - fk.joint_origins[i]).cross(F);
      M(i, j) = fk.joint_axes[i].dot(torque_about_oi);
      M(j, i) = M(i, j);
    }
  }
  return M;
}

inline MatX mass_matrix(const ChainModel& model, const VecX& q) {
  return mass_matrix(model, forward_kinematics(model, q));
}

inline VecX forward_dynamics(const ChainModel& model, const JointState& state, const VecX& tau,
                             std::span<const Wrench> ext_wrenches,
                             const Vec3& gravity = kDefaultGravity) {
  const int n = model.dof();
  if (tau.size() != n) throw std::invalid_argument("forward_dynamics: torque length mismatch");
  if (!tau.allFinite()) throw std::invalid_argument("forward_dynamics: torque not finite");

  const FkResult fk = forward_kinematics(model, state.q);
  VecX rhs = tau - bias_forces(model, state.q, state.qd, gravity);
  if (!ext_wrenches.empty()) {
    if (static_cast<int>(ext_wrenches.size()) != n)
      throw std::invalid_argument("forward_dynamics: wrench list must be empty or length n");
    for (int i = 0; i < n; ++i)
      rhs += jacobian(model, fk, BodyRef::link(i)).transpose() * ext_wrenches[i].stacked();
  }
  return mass_matrix(model, fk).llt().solve(rhs);
}

// Damped operational-space inertia: (J M^-1 J^T + reg I)^-1. The damping
// keeps compensation torques bounded at singular configurations.
inline Mat6 operational_space_inertia(const ChainModel& model, const FkResult& fk,
                                      const MatX& M, BodyRef body,
                                      double lambda_reg = kDefaultLambdaReg) {
  const Mat6X J = jacobian(model, fk, body);
  const Mat6 A = J * M.llt().solve(J.transpose()) + lambda_reg * Mat6::Identity();
  const Mat6 Lambda = A.ldlt().solve(Mat6::Identity());
  return 0.5 * (Lambda + Lambda.transpose());
}

inline Mat6 operational_space_inertia(const ChainModel& model, const VecX& q, BodyRef body,
                                      double lambda_reg = kDefaultLambdaReg) {
  const FkResult fk = forward_kinematics(model, q);
  return operational_space_inertia(model, fk, mass_matrix(model, fk), body, lambda_reg);
}

struct DynamicsQuantities {
  MatX M;
  VecX bias;    // Coriolis/centrifugal + gravity + viscous damping
  Mat6 Lambda;  // EE operational-space inertia
  Vec6 Q_op;    // operational-space centrifugal/Coriolis term
  Vec6 G_op;    // operational-space gravity term
};

inline DynamicsQuantities dynamics_quantities(const ChainModel& model, const JointState& state,
                                              const Vec3& gravity,
                                              double lambda_reg = kDefaultLambdaReg) {
  DynamicsQuantities out;
  const FkResult fk = forward_kinematics(model, state.q);
  out.M = mass_matrix(model, fk);
  out.bias = bias_forces(model, state.q, state.qd, gravity);
  out.Lambda = operational_space_inertia(model, fk, out.M, BodyRef::end_effector(), lambda_reg);

  const Mat6X J = jacobian(model, fk, BodyRef::end_effector());
  const auto llt = out.M.llt();
  const MatX JbarT = out.Lambda * J * llt.solve(MatX::Identity(model.dof(), model.dof()));
  const Vec6 jdqd = jacobian_dot_qdot(model, state, BodyRef::end_effector());
  out.Q_op = JbarT * coriolis_torque(model, state.q, state.qd) - out.Lambda * jdqd;
  out.G_op = JbarT * gravity_torque(model, state.q, gravity);
  return out;
}

inline double kinetic_energy(const ChainModel& model, const FkResult& fk,
                             const ChainMotion& motion) {
  double e = 0.0;
  for (int i = 0; i < model.dof(); ++i) {
    const Mat3 R = fk.link_rotations[i];
    const Mat3 I_w = R * model.links[i].inertia * R.transpose();
    e += 0.5 * model.links[i].mass * motion.v_com[i].squaredNorm() +
         0.5 * motion.omega[i].dot(I_w * motion.omega[i]);
  }
  return e;
}

inline double potential_energy(const ChainModel& model, const FkResult& fk, const Vec3& gravity) {
  double e = 0.0;
  for (int i = 0; i < model.dof(); ++i)
    e -= model.links[i].mass * gravity.dot(fk.com_positions[i]);
  return e;
}

inline double mechanical_energy(const ChainModel& model, const JointState& state,
                                const Vec3& gravity) {
  const FkResult fk = forward_kinematics(model, state.q);
  const ChainMotion motion = chain_motion(model, fk, state.qd, VecX::Zero(model.dof()));
  return kinetic_energy(model, fk, motion) + potential_energy(model, fk, gravity);
}

}  // namespace armstab
