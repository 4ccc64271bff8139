// Shared fixtures and independent oracles for the unit suites. Everything in
// here is deliberately written from first principles (closed forms, finite
// differences, dense linear algebra) so it can cross-check the library.
#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "armstab/dynamics.hpp"

namespace armstab::testing {

inline VecX random_config(const ChainModel& model, CounterRng& rng, double range = 2.0) {
  VecX q(model.dof());
  for (int i = 0; i < model.dof(); ++i) q(i) = rng.uniform(-range, range);
  return q;
}

inline VecX random_vec(int n, CounterRng& rng, double range = 2.0) {
  VecX v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-range, range);
  return v;
}

inline Vec3 random_vec3(CounterRng& rng, double range = 1.0) {
  return Vec3(rng.uniform(-range, range), rng.uniform(-range, range), rng.uniform(-range, range));
}

// Central finite-difference Jacobian of forward kinematics. Orientation rows
// come from the rotation-vector difference of the body orientation.
inline Mat6X fd_jacobian(const ChainModel& model, const VecX& q, BodyRef body, double h = 1e-6) {
  const int n = model.dof();
  Mat6X J(6, n);
  for (int j = 0; j < n; ++j) {
    VecX qp = q, qm = q;
    qp(j) += h;
    qm(j) -= h;
    const FkResult fp = forward_kinematics(model, qp);
    const FkResult fm = forward_kinematics(model, qm);
    Vec3 pp, pm;
    Quat rp, rm;
    if (body.is_ee()) {
      pp = fp.ee.position;
      pm = fm.ee.position;
      rp = fp.ee.orientation;
      rm = fm.ee.orientation;
    } else {
      pp = fp.com_positions[body.link_index];
      pm = fm.com_positions[body.link_index];
      rp = fp.link_poses[body.link_index].orientation;
      rm = fm.link_poses[body.link_index].orientation;
    }
    J.col(j).head<3>() = (pp - pm) / (2.0 * h);
    J.col(j).tail<3>() = quat_log(rp * rm.conjugate()) / (2.0 * h);
  }
  return J;
}

// Textbook closed-form mass matrix of a planar 2R arm with z-axes.
inline Eigen::Matrix2d planar2_mass_matrix(const ChainModel& m, const VecX& q) {
  const double m1 = m.links[0].mass, m2 = m.links[1].mass;
  const double l1 = m.joints[1].origin_translation.x();
  const double lc1 = m.links[0].com_offset.x(), lc2 = m.links[1].com_offset.x();
  const double I1 = m.links[0].inertia(2, 2), I2 = m.links[1].inertia(2, 2);
  const double c2 = std::cos(q(1));
  Eigen::Matrix2d M;
  M(0, 0) = m1 * lc1 * lc1 + I1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + I2;
  M(0, 1) = M(1, 0) = m2 * (lc2 * lc2 + l1 * lc2 * c2) + I2;
  M(1, 1) = m2 * lc2 * lc2 + I2;
  return M;
}

// Planar 2R forward kinematics closed form (EE position).
inline Vec3 planar2_fk(const ChainModel& m, const VecX& q) {
  const double l1 = m.joints[1].origin_translation.x();
  const double l2 = m.ee_translation.x();
  return Vec3(l1 * std::cos(q(0)) + l2 * std::cos(q(0) + q(1)),
              l1 * std::sin(q(0)) + l2 * std::sin(q(0) + q(1)), 0.0);
}

}  // namespace armstab::testing
