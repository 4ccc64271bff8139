#include "test_helpers.hpp"

using namespace armstab;
using namespace armstab::testing;

TEST_CASE("mass matrix is symmetric and matches the planar closed form") {
  const ChainModel m = builtin_toy_arm(2);
  CounterRng rng(13, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const VecX q = random_config(m, rng, 3.0);
    const MatX M = mass_matrix(m, q);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::Matrix2d M_ref = planar2_mass_matrix(m, q);
    CHECK((M - M_ref).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("spatial arm mass matrix is positive definite at q = 0") {
  const MatX M = mass_matrix(builtin_toy_arm(4), VecX::Zero(4));
  Eigen::SelfAdjointEigenSolver<MatX> eig(M);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kinetic energy identity: half qd' M qd equals summed link energies") {
  CounterRng rng(13, 2);
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < 100; ++trial) {
      const VecX q = random_config(m, rng, 3.0);
      const VecX qd = random_vec(n, rng, 2.0);
      const FkResult fk = forward_kinematics(m, q);
      const ChainMotion motion = chain_motion(m, fk, qd, VecX::Zero(n));
      const double e_links = kinetic_energy(m, fk, motion);
      const double e_quad = 0.5 * qd.dot(mass_matrix(m, fk) * qd);
      CHECK(std::abs(e_links - e_quad) < 1e-9 * std::max(1.0, e_links));
    }
  }
}

TEST_CASE("inverse dynamics: zero motion, zero gravity, zero wrenches gives zero") {
  const ChainModel m = builtin_toy_arm(4);
  const VecX z = VecX::Zero(4);
  CHECK(inverse_dynamics(m, z, z, z, {}, Vec3::Zero()).norm() == 0.0);
}

TEST_CASE("pendulum holding torque is m g l at the horizontal") {
  const ChainModel m = builtin_toy_arm(1);
  VecX q(1), z = VecX::Zero(1);
  q << kPi / 2.0;  // swung up to horizontal from hanging
  const VecX tau = inverse_dynamics(m, q, z, z, {}, Vec3(0.0, 0.0, -9.81));
  CHECK(std::abs(std::abs(tau(0)) - 1.0 * 9.81 * 0.5) < 1e-12);
}

TEST_CASE("CRBA and RNEA agree: M qdd + bias equals inverse dynamics") {
  CounterRng rng(13, 3);
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < 1000; ++trial) {
      const VecX q = random_config(m, rng, 3.0);
      const VecX qd = random_vec(n, rng, 2.0);
      const VecX qdd = random_vec(n, rng, 2.0);
      const VecX lhs = mass_matrix(m, q) * qdd + bias_forces(m, q, qd, kDefaultGravity);
      const VecX rhs = inverse_dynamics(m, q, qd, qdd, {}, kDefaultGravity);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("operational-space inertia matches the dense pseudo-inverse on the range") {
  CounterRng rng(13, 4);
  const ChainModel m = builtin_toy_arm(2);
  for (int trial = 0; trial < 50; ++trial) {
    VecX q = random_config(m, rng, 2.5);
    if (std::abs(std::sin(q(1))) < 0.2) q(1) += 0.4;  // keep away from stretch singularity
    const FkResult fk = forward_kinematics(m, q);
    const MatX M = mass_matrix(m, fk);
    const Mat6X J = jacobian(m, fk, BodyRef::end_effector());
    // near-zero damping isolates the dense comparison from the default
    // regularization, which perturbs Lambda at the 1e-6 level by design
    const Mat6 Lambda = operational_space_inertia(m, q, BodyRef::end_effector(), 1e-9);

    CHECK((Lambda - Lambda.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((operational_space_inertia(m, q, BodyRef::end_effector()) -
           operational_space_inertia(m, q, BodyRef::end_effector()).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-8);

    // dense oracle restricted to the reachable subspace: with U spanning
    // range(J), U' Lambda U should invert U' (J M^-1 J') U
    const Mat6 A = J * M.llt().solve(J.transpose());
    Eigen::JacobiSVD<MatX> svd(J, Eigen::ComputeThinU);
    const MatX U = svd.matrixU().leftCols(2);  // rank(J) = 2 for the planar arm
    const MatX Lam_r_expected = (U.transpose() * A * U).inverse();
    CHECK((U.transpose() * Lambda * U - Lam_r_expected).cwiseAbs().maxCoeff() <
          1e-6 * std::max(1.0, Lam_r_expected.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("operational-space inertia stays finite at the stretched singularity") {
  const ChainModel m = builtin_toy_arm(2);
  const Mat6 Lambda = operational_space_inertia(m, VecX::Zero(2), BodyRef::end_effector());
  CHECK(Lambda.allFinite());
}

TEST_CASE("forward dynamics inverts inverse dynamics") {
  CounterRng rng(13, 5);
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < 100; ++trial) {
      const JointState s{random_config(m, rng, 3.0), random_vec(n, rng, 2.0)};
      const VecX qdd_star = random_vec(n, rng, 2.0);

      std::vector<Wrench> wrenches(n);
      for (Wrench& w : wrenches) {
        w.force = random_vec3(rng, 5.0);
        w.torque = random_vec3(rng, 2.0);
      }
      const VecX tau = inverse_dynamics(m, s.q, s.qd, qdd_star, wrenches, kDefaultGravity);
      const VecX qdd = forward_dynamics(m, s, tau, wrenches, kDefaultGravity);
      CHECK((qdd - qdd_star).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("forward dynamics: zero torque, zero gravity, zero velocity is rest") {
  const ChainModel m = builtin_toy_arm(4);
  const JointState s = JointState::zero(4);
  CHECK(forward_dynamics(m, s, VecX::Zero(4), {}, Vec3::Zero()).norm() == 0.0);
}

TEST_CASE("unit wrench on a single-link arm: qdd = (J' w) / M") {
  const ChainModel m = builtin_toy_arm(1);
  const JointState s = JointState::zero(1);
  std::vector<Wrench> w(1);
  w[0].force = Vec3(1.0, 0.0, 0.0);  // perpendicular to the hanging link
  const FkResult fk = forward_kinematics(m, s.q);
  const double tau_w = (jacobian(m, fk, BodyRef::link(0)).transpose() * w[0].stacked())(0);
  const double M = mass_matrix(m, s.q)(0, 0);
  const VecX qdd = forward_dynamics(m, s, VecX::Zero(1), w, Vec3::Zero());
  CHECK(std::abs(qdd(0) - tau_w / M) < 1e-12);
}

TEST_CASE("Lambda is the apparent EE inertia under a task-space force") {
  CounterRng rng(13, 6);
  const ChainModel m = builtin_toy_arm(4);
  for (int trial = 0; trial < 20; ++trial) {
    const JointState s{random_config(m, rng, 1.5), VecX::Zero(4)};
    const FkResult fk = forward_kinematics(m, s.q);
    const Mat6X J = jacobian(m, fk, BodyRef::end_effector());
    const Mat6 Lambda = operational_space_inertia(m, s.q, BodyRef::end_effector());

    Vec6 f;
    for (int i = 0; i < 6; ++i) f(i) = rng.uniform(-1.0, 1.0);
    // bias-free response to tau = J' f, qd = 0: a_ee = J qdd should equal
    // Lambda^-1 f up to the regularization term
    const VecX qdd = forward_dynamics(m, s, J.transpose() * f, {}, Vec3::Zero());
    const Vec6 a = J * qdd;
    const Vec6 expected = Lambda.ldlt().solve(f);
    CHECK((a - expected).norm() < 1e-5 * std::max(1.0, expected.norm()));
  }
}

TEST_CASE("free tumbling without gravity conserves kinetic energy") {
  const ChainModel m = builtin_toy_arm(2);
  JointState s{VecX::Zero(2), VecX::Zero(2)};
  s.q << 0.4, -0.7;
  s.qd << 1.3, -0.8;
  const double dt = 1e-4;
  const double e0 = mechanical_energy(m, s, Vec3::Zero());
  double max_drift = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const VecX qdd = forward_dynamics(m, s, VecX::Zero(2), {}, Vec3::Zero());
    s.qd += dt * qdd;
    s.q += dt * s.qd;
    max_drift = std::max(max_drift, std::abs(mechanical_energy(m, s, Vec3::Zero()) - e0));
  }
  CHECK(max_drift / std::abs(e0) < 1e-4);
}
