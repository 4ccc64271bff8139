// Forward kinematics, body Jacobians, and the velocity/acceleration
// recursion over the chain.
//
// Jacobians are 6xn with linear rows on top, taken at the link COM for link
// bodies and at the EE frame for the end-effector, all in the base frame.
// The motion recursion accepts a base-motion seed (world motion of the base
// expressed in base coordinates); with a zero seed it produces the ordinary
// fixed-base quantities, with a nonzero seed it produces exact world-motion
// kinematics for a kinematically driven base.
#pragma once

#include <vector>

#include "armstab/chain.hpp"

namespace armstab {

struct JointState {
  VecX q;
  VecX qd;

  static JointState zero(int n) { return {VecX::Zero(n), VecX::Zero(n)}; }
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

struct BodyRef {
  int link_index = -1;  // -1 means end-effector

  static BodyRef link(int i) { return {i}; }
  static BodyRef end_effector() { return {-1}; }
  bool is_ee() const { return link_index < 0; }
};

struct FkResult {
  std::vector<Vec3> joint_origins;   // o_i
  std::vector<Vec3> joint_axes;      // z_i, base frame
  std::vector<Mat3> link_rotations;  // base <- link i
  std::vector<Vec3> com_positions;   // c_i
  std::vector<Pose> link_poses;      // origin at o_i, orientation of link i
  Pose ee;
};

inline FkResult forward_kinematics(const ChainModel& model, const VecX& q) {
  const int n = model.dof();
  if (q.size() != n) throw std::invalid_argument("forward_kinematics: q has wrong length");
  if (!q.allFinite()) throw std::invalid_argument("forward_kinematics: q not finite");

  FkResult fk;
  fk.joint_origins.resize(n);
  fk.joint_axes.resize(n);
  fk.link_rotations.resize(n);
  fk.com_positions.resize(n);
  fk.link_poses.resize(n);

  Mat3 R_parent = Mat3::Identity();
  Vec3 p_parent = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const JointSpec& j = model.joints[i];
    const Vec3 origin = p_parent + R_parent * j.origin_translation;
    const Mat3 R_joint = R_parent * j.origin_rotation.toRotationMatrix();
    const Mat3 R_link = R_joint * Eigen::AngleAxisd(q(i), j.axis).toRotationMatrix();

    fk.joint_origins[i] = origin;
    fk.joint_axes[i] = R_joint * j.axis;
    fk.link_rotations[i] = R_link;
    fk.com_positions[i] = origin + R_link * model.links[i].com_offset;
    fk.link_poses[i].position = origin;
    fk.link_poses[i].orientation = Quat(R_link).normalized();

    R_parent = R_link;
    p_parent = origin;
  }

  fk.ee.position = p_parent + R_parent * model.ee_translation;
  fk.ee.orientation = Quat(R_parent * model.ee_rotation.toRotationMatrix()).normalized();
  return fk;
}

inline Mat6X jacobian(const ChainModel& model, const FkResult& fk, BodyRef body) {
  const int n = model.dof();
  if (!body.is_ee() && (body.link_index < 0 || body.link_index >= n))
    throw std::invalid_argument("jacobian: invalid body index");

  const Vec3 point = body.is_ee() ? fk.ee.position : fk.com_positions[body.link_index];
  const int last_joint = body.is_ee() ? n - 1 : body.link_index;

  Mat6X J = Mat6X::Zero(6, n);
  for (int j = 0; j <= last_joint; ++j) {
    const Vec3& z = fk.joint_axes[j];
    J.col(j).head<3>() = z.cross(point - fk.joint_origins[j]);
    J.col(j).tail<3>() = z;
  }
  return J;
}

inline Mat6X jacobian(const ChainModel& model, const VecX& q, BodyRef body) {
  return jacobian(model, forward_kinematics(model, q), body);
}

// World motion of the base, expressed in base coordinates, used to seed the
// recursion. v0/a0 refer to the base frame origin.
struct MotionSeed {
  Vec3 v0 = Vec3::Zero();
  Vec3 a0 = Vec3::Zero();
  Vec3 omega0 = Vec3::Zero();
  Vec3 alpha0 = Vec3::Zero();
};

struct ChainMotion {
  std::vector<Vec3> omega;  // link angular velocity
  std::vector<Vec3> alpha;  // link angular acceleration
  std::vector<Vec3> v_com;
  std::vector<Vec3> a_com;
  Vec3 v_ee = Vec3::Zero();
  Vec3 a_ee = Vec3::Zero();
};

inline ChainMotion chain_motion(const ChainModel& model, const FkResult& fk, const VecX& qd,
                                const VecX& qdd, const MotionSeed& seed = {}) {
  const int n = model.dof();
  if (qd.size() != n || qdd.size() != n)
    throw std::invalid_argument("chain_motion: velocity/acceleration length mismatch");

  ChainMotion m;
  m.omega.resize(n);
  m.alpha.resize(n);
  m.v_com.resize(n);
  m.a_com.resize(n);

  Vec3 omega_prev = seed.omega0;
  Vec3 alpha_prev = seed.alpha0;
  Vec3 v_prev = seed.v0;  // velocity/acceleration of the previous joint origin
  Vec3 a_prev = seed.a0;
  Vec3 p_prev = Vec3::Zero();

  for (int i = 0; i < n; ++i) {
    const Vec3 d = fk.joint_origins[i] - p_prev;  // fixed in the parent body
    const Vec3 v_o = v_prev + omega_prev.cross(d);
    const Vec3 a_o = a_prev + alpha_prev.cross(d) + omega_prev.cross(omega_prev.cross(d));

    const Vec3& z = fk.joint_axes[i];
    m.omega[i] = omega_prev + z * qd(i);
    m.alpha[i] = alpha_prev + z * qdd(i) + omega_prev.cross(z * qd(i));

    const Vec3 r = fk.com_positions[i] - fk.joint_origins[i];  // fixed in link i
    m.v_com[i] = v_o + m.omega[i].cross(r);
    m.a_com[i] = a_o + m.alpha[i].cross(r) + m.omega[i].cross(m.omega[i].cross(r));

    omega_prev = m.omega[i];
    alpha_prev = m.alpha[i];
    v_prev = v_o;
    a_prev = a_o;
    p_prev = fk.joint_origins[i];
  }

  const Vec3 r_ee = fk.ee.position - p_prev;
  m.v_ee = v_prev + omega_prev.cross(r_ee);
  m.a_ee = a_prev + alpha_prev.cross(r_ee) + omega_prev.cross(omega_prev.cross(r_ee));
  return m;
}

// Jdot(q) * qdot for the selected body: body spatial acceleration at zero
// joint acceleration (fixed base).
inline Vec6 jacobian_dot_qdot(const ChainModel& model, const JointState& state, BodyRef body) {
  const int n = model.dof();
  if (!state.q.allFinite() || !state.qd.allFinite())
    throw std::invalid_argument("jacobian_dot_qdot: state not finite");
  if (!body.is_ee() && (body.link_index < 0 || body.link_index >= n))
    throw std::invalid_argument("jacobian_dot_qdot: invalid body index");

  const FkResult fk = forward_kinematics(model, state.q);
  const ChainMotion m = chain_motion(model, fk, state.qd, VecX::Zero(n));
  Vec6 out;
  if (body.is_ee()) {
    out << m.a_ee, m.alpha.back();
  } else {
    out << m.a_com[body.link_index], m.alpha[body.link_index];
  }
  return out;
}

// EE twist [v; w] in the base frame.
inline Vec6 ee_twist(const ChainModel& model, const FkResult& fk, const VecX& qd) {
  const ChainMotion m = chain_motion(model, fk, qd, VecX::Zero(model.dof()));
  Vec6 tw;
  tw << m.v_ee, m.omega.back();
  return tw;
}

}  // namespace armstab
