#include "test_helpers.hpp"

using namespace armstab;
using namespace armstab::testing;

TEST_CASE("planar arm FK matches the closed form") {
  const ChainModel m = builtin_toy_arm(2);

  VecX q = VecX::Zero(2);
  CHECK(forward_kinematics(m, q).ee.position.isApprox(Vec3(2.0, 0.0, 0.0), 1e-12));

  q << kPi / 2.0, 0.0;
  CHECK(forward_kinematics(m, q).ee.position.isApprox(Vec3(0.0, 2.0, 0.0), 1e-12));

  CounterRng rng(7, 1);
  for (int trial = 0; trial < 200; ++trial) {
    q = random_config(m, rng, 3.0);
    const Vec3 expect = planar2_fk(m, q);
    CHECK((forward_kinematics(m, q).ee.position - expect).norm() < 1e-12);
  }
}

TEST_CASE("FK returns unit quaternions and rejects bad input") {
  CounterRng rng(7, 2);
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < 50; ++trial) {
      const FkResult fk = forward_kinematics(m, random_config(m, rng, 3.0));
      CHECK(std::abs(fk.ee.orientation.norm() - 1.0) < 1e-12);
      for (const Pose& p : fk.link_poses) CHECK(std::abs(p.orientation.norm() - 1.0) < 1e-12);
    }
  }
  CHECK_THROWS_AS(forward_kinematics(builtin_toy_arm(2), VecX::Zero(3)), std::invalid_argument);
}

TEST_CASE("planar EE Jacobian at q = 0 matches the analytic expression") {
  const ChainModel m = builtin_toy_arm(2);
  const Mat6X J = jacobian(m, VecX::Zero(2), BodyRef::end_effector());
  CHECK(J.col(0).head<3>().isApprox(Vec3(0.0, 2.0, 0.0), 1e-12));
  CHECK(J.col(1).head<3>().isApprox(Vec3(0.0, 1.0, 0.0), 1e-12));
  CHECK(J.col(0).tail<3>().isApprox(Vec3(0.0, 0.0, 1.0), 1e-12));
  CHECK(J.col(1).tail<3>().isApprox(Vec3(0.0, 0.0, 1.0), 1e-12));
}

TEST_CASE("single-joint COM Jacobian by hand") {
  ChainModel m;
  JointSpec j;  // z-axis at the origin
  LinkSpec l;
  l.mass = 1.0;
  l.com_offset = Vec3(0.5, 0.0, 0.0);
  l.inertia = Vec3(0.05, 0.05, 0.05).asDiagonal();
  m.joints = {j};
  m.links = {l};
  m.ee_translation = Vec3(1.0, 0.0, 0.0);
  REQUIRE(validate(m).empty());

  const Mat6X J = jacobian(m, VecX::Zero(1), BodyRef::link(0));
  CHECK(J.col(0).head<3>().isApprox(Vec3(0.0, 0.5, 0.0), 1e-12));
  CHECK(J.col(0).tail<3>().isApprox(Vec3(0.0, 0.0, 1.0), 1e-12));
}

TEST_CASE("Jacobians match finite differences of FK for every body") {
  CounterRng rng(7, 3);
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < 100; ++trial) {
      const VecX q = random_config(m, rng, 3.0);
      for (int body = -1; body < n; ++body) {
        const BodyRef ref = body < 0 ? BodyRef::end_effector() : BodyRef::link(body);
        const Mat6X J = jacobian(m, q, ref);
        const Mat6X J_fd = fd_jacobian(m, q, ref);
        const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
        CHECK((J - J_fd).cwiseAbs().maxCoeff() / scale < 1e-6);
      }
    }
  }
  CHECK_THROWS_AS(jacobian(builtin_toy_arm(2), VecX::Zero(2), BodyRef::link(5)),
                  std::invalid_argument);
}

TEST_CASE("angular Jacobian columns are the world joint axes") {
  CounterRng rng(7, 4);
  const ChainModel m = builtin_toy_arm(4);
  for (int trial = 0; trial < 20; ++trial) {
    const VecX q = random_config(m, rng, 3.0);
    const FkResult fk = forward_kinematics(m, q);
    const Mat6X J = jacobian(m, fk, BodyRef::end_effector());
    for (int j = 0; j < 4; ++j) CHECK((J.col(j).tail<3>() - fk.joint_axes[j]).norm() < 1e-12);
  }
}

TEST_CASE("jacobian_dot_qdot: zero velocity gives zero") {
  const ChainModel m = builtin_toy_arm(4);
  CounterRng rng(7, 5);
  const JointState s{random_config(m, rng), VecX::Zero(4)};
  CHECK(jacobian_dot_qdot(m, s, BodyRef::end_effector()).norm() == 0.0);
}

TEST_CASE("jacobian_dot_qdot: planar centripetal case by hand") {
  const ChainModel m = builtin_toy_arm(2);
  JointState s{VecX::Zero(2), VecX::Zero(2)};
  s.qd << 1.0, 0.0;
  const Vec6 jdqd = jacobian_dot_qdot(m, s, BodyRef::end_effector());
  CHECK(jdqd.head<3>().isApprox(Vec3(-2.0, 0.0, 0.0), 1e-12));
  CHECK(jdqd.tail<3>().norm() < 1e-12);
}

TEST_CASE("jacobian_dot_qdot matches the finite-difference of J along qd") {
  CounterRng rng(7, 6);
  for (int n : {2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < 30; ++trial) {
      JointState s{random_config(m, rng, 2.0), random_vec(n, rng, 1.5)};
      const Vec6 jdqd = jacobian_dot_qdot(m, s, BodyRef::end_effector());
      const double dt = 1e-7;
      const Mat6X J0 = jacobian(m, s.q, BodyRef::end_effector());
      const Mat6X J1 = jacobian(m, s.q + dt * s.qd, BodyRef::end_effector());
      const Vec6 fd = ((J1 - J0) / dt) * s.qd;
      CHECK((jdqd - fd).norm() < 1e-5 * std::max(1.0, jdqd.norm()));
    }
  }
}

TEST_CASE("EE velocity from the Jacobian matches FK differencing") {
  CounterRng rng(7, 8);
  const ChainModel m = builtin_toy_arm(4);
  for (int trial = 0; trial < 50; ++trial) {
    const VecX q = random_config(m, rng, 2.0);
    const VecX qd = random_vec(4, rng, 1.5);
    const Vec6 v = jacobian(m, q, BodyRef::end_effector()) * qd;

    const double dt = 1e-7;
    const FkResult f0 = forward_kinematics(m, q - 0.5 * dt * qd);
    const FkResult f1 = forward_kinematics(m, q + 0.5 * dt * qd);
    const Vec3 v_fd = (f1.ee.position - f0.ee.position) / dt;
    const Vec3 w_fd = quat_log(f1.ee.orientation * f0.ee.orientation.conjugate()) / dt;
    CHECK((v.head<3>() - v_fd).norm() < 1e-6 * std::max(1.0, v.norm()));
    CHECK((v.tail<3>() - w_fd).norm() < 1e-6 * std::max(1.0, v.norm()));

    // ee_twist agrees with J qd
    const FkResult fk = forward_kinematics(m, q);
    CHECK((ee_twist(m, fk, qd) - v).norm() < 1e-12);
  }
}
