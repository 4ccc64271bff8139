// Fixed-base serial-chain arm description: joint/link parameters, model
// validation, and the built-in reference arms used by tests and the CLI.
//
// Frame layout: joint i sits at a fixed transform (origin_translation,
// origin_rotation) in the frame of link i-1 (link 0 = base). Link i's frame
// is the joint i frame rotated by q_i about `axis`. The end-effector frame
// hangs off the last link via (ee_translation, ee_rotation). All joints are
// revolute and the chain is unbranched, so link count equals joint count.
#pragma once

#include <string>
#include <vector>

#include "armstab/core.hpp"

namespace armstab {

struct JointSpec {
  Vec3 axis = Vec3::UnitZ();            // unit, in parent frame
  Vec3 origin_translation = Vec3::Zero();
  Quat origin_rotation = Quat::Identity();
  double position_lower = -kPi;
  double position_upper = kPi;
  double torque_limit = 100.0;          // N*m, > 0
  double viscous_damping = 0.0;         // N*m*s/rad, >= 0
};

struct LinkSpec {
  double mass = 1.0;                    // kg, > 0
  Vec3 com_offset = Vec3::Zero();       // m, in link frame
  Mat3 inertia = Mat3::Identity();      // kg*m^2, about COM, link frame
};

struct ChainModel {
  std::vector<JointSpec> joints;
  std::vector<LinkSpec> links;
  Vec3 ee_translation = Vec3::Zero();   // last link frame -> EE frame
  Quat ee_rotation = Quat::Identity();
  std::string name;

  int dof() const { return static_cast<int>(joints.size()); }
};

struct Violation {
  std::string field;  // e.g. "joint[1].axis"
  std::string rule;   // e.g. "axis not unit"
};

inline std::vector<Violation> validate(const ChainModel& model) {
  std::vector<Violation> out;
  auto flag = [&out](std::string field, std::string rule) {
    out.push_back({std::move(field), std::move(rule)});
  };

  if (model.joints.empty()) flag("joints", "n must be >= 1");
  if (model.joints.size() != model.links.size())
    flag("links", "joint and link counts differ");

  for (size_t i = 0; i < model.joints.size(); ++i) {
    const JointSpec& j = model.joints[i];
    const std::string base = "joint[" + std::to_string(i) + "]";
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) flag(base + ".axis", "axis not unit");
    if (!(j.position_lower < j.position_upper))
      flag(base + ".position_limits", "lower limit must be below upper limit");
    if (!(j.torque_limit > 0.0)) flag(base + ".torque_limit", "torque limit must be positive");
    if (j.viscous_damping < 0.0) flag(base + ".viscous_damping", "damping must be non-negative");
    if (std::abs(j.origin_rotation.norm() - 1.0) > 1e-9)
      flag(base + ".origin_rotation", "quaternion not unit");
    if (!j.axis.allFinite() || !j.origin_translation.allFinite())
      flag(base, "non-finite entries");
  }

  for (size_t i = 0; i < model.links.size(); ++i) {
    const LinkSpec& l = model.links[i];
    const std::string base = "link[" + std::to_string(i) + "]";
    if (!(l.mass > 0.0)) flag(base + ".mass", "mass must be positive");
    if (!l.com_offset.allFinite() || !l.inertia.allFinite()) {
      flag(base, "non-finite entries");
      continue;
    }
    if ((l.inertia - l.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      flag(base + ".inertia", "inertia not symmetric");
      continue;  // principal-moment checks assume symmetry
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(l.inertia);
    const Vec3 moments = eig.eigenvalues();  // ascending
    if (moments(0) <= 0.0) {
      flag(base + ".inertia", "inertia not positive definite");
    } else if (moments(2) > moments(0) + moments(1) + 1e-12) {
      flag(base + ".inertia", "triangle inequality violated on principal moments");
    }
  }

  if (std::abs(model.ee_rotation.norm() - 1.0) > 1e-9)
    flag("end_effector.rotation", "quaternion not unit");

  return out;
}

inline std::string describe(const std::vector<Violation>& violations) {
  std::string s;
  for (const Violation& v : violations) {
    if (!s.empty()) s += "; ";
    s += v.field + ": " + v.rule;
  }
  return s;
}

// Reference arms. Kept deliberately simple; they stand in for a humanoid arm
// at desk scale and are the fixtures for every oracle suite.
//
//   n=1  pendulum: unit mass 0.5 m below a y-axis hinge. The flywheel-like
//        inertia keeps the swing slow so long energy-conservation runs stay
//        well inside integrator tolerance.
//   n=2  planar arm: two unit-mass, unit-length links, both z-axes, moving
//        in the xy plane. FK at q = 0 puts the EE at (2, 0, 0).
//   n=4  spatial arm: alternating z/y axes, 0.3 m links, tapered masses.
inline ChainModel builtin_toy_arm(int n) {
  ChainModel m;
  auto rod_inertia = [](double mass, double length) {
    const double a = mass * length * length / 12.0;
    return Vec3(0.02 * a, a, a).asDiagonal().toDenseMatrix();
  };

  if (n == 1) {
    m.name = "pendulum";
    JointSpec j;
    j.axis = Vec3::UnitY();
    j.position_lower = -4.0 * kPi;
    j.position_upper = 4.0 * kPi;
    j.torque_limit = 200.0;
    LinkSpec l;
    l.mass = 1.0;
    l.com_offset = Vec3(0.0, 0.0, -0.5);  // hangs straight down at q = 0
    l.inertia = Vec3(2.0, 2.0, 0.1).asDiagonal();
    m.joints = {j};
    m.links = {l};
    m.ee_translation = Vec3(0.0, 0.0, -1.0);
  } else if (n == 2) {
    m.name = "planar2";
    for (int i = 0; i < 2; ++i) {
      JointSpec j;
      j.axis = Vec3::UnitZ();
      j.origin_translation = (i == 0) ? Vec3::Zero() : Vec3(1.0, 0.0, 0.0);
      j.position_lower = -4.0 * kPi;
      j.position_upper = 4.0 * kPi;
      j.torque_limit = 600.0;
      LinkSpec l;
      l.mass = 1.0;
      l.com_offset = Vec3(0.5, 0.0, 0.0);
      l.inertia = rod_inertia(1.0, 1.0);
      m.joints.push_back(j);
      m.links.push_back(l);
    }
    m.ee_translation = Vec3(1.0, 0.0, 0.0);
  } else if (n == 4) {
    m.name = "spatial4";
    const double masses[4] = {1.2, 1.0, 0.8, 0.5};
    for (int i = 0; i < 4; ++i) {
      JointSpec j;
      j.axis = (i % 2 == 0) ? Vec3::UnitZ() : Vec3::UnitY();
      j.origin_translation = (i == 0) ? Vec3::Zero() : Vec3(0.3, 0.0, 0.0);
      j.position_lower = -4.0 * kPi;
      j.position_upper = 4.0 * kPi;
      j.torque_limit = 600.0;
      LinkSpec l;
      l.mass = masses[i];
      l.com_offset = Vec3(0.15, 0.0, 0.0);
      l.inertia = rod_inertia(masses[i], 0.3);
      m.joints.push_back(j);
      m.links.push_back(l);
    }
    m.ee_translation = Vec3(0.3, 0.0, 0.0);
  } else {
    throw std::invalid_argument("builtin_toy_arm: unsupported dof " + std::to_string(n) +
                                " (supported: 1, 2, 4)");
  }
  return m;
}

}  // namespace armstab
