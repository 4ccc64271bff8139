#include <fstream>

#include "armstab/chain_io.hpp"
#include "test_helpers.hpp"

using namespace armstab;
using namespace armstab::testing;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool has_violation(const std::vector<Violation>& vs, const std::string& field_part,
                   const std::string& rule_part) {
  for (const Violation& v : vs)
    if (v.field.find(field_part) != std::string::npos &&
        v.rule.find(rule_part) != std::string::npos)
      return true;
  return false;
}

// Random valid model for round-trip fuzzing.
ChainModel random_model(CounterRng& rng) {
  ChainModel m;
  const int n = 1 + rng.uniform_int(5);
  for (int i = 0; i < n; ++i) {
    JointSpec j;
    j.axis = random_vec3(rng).normalized();
    j.origin_translation = random_vec3(rng, 0.5);
    j.origin_rotation = quat_exp(random_vec3(rng, 1.0));
    j.position_lower = rng.uniform(-6.0, -1.0);
    j.position_upper = rng.uniform(1.0, 6.0);
    j.torque_limit = rng.uniform(10.0, 300.0);
    j.viscous_damping = rng.uniform(0.0, 0.5);
    LinkSpec l;
    l.mass = rng.uniform(0.2, 3.0);
    l.com_offset = random_vec3(rng, 0.4);
    // random valid principal moments in a random frame: |a - b| <= c <= a + b
    const double a = rng.uniform(0.2, 1.0), b = rng.uniform(0.2, 1.0);
    const double c = rng.uniform(std::abs(a - b) + 0.05, a + b - 0.05);
    const Mat3 R = quat_exp(random_vec3(rng, 2.0)).toRotationMatrix();
    const Mat3 I = R * Vec3(a, b, c).asDiagonal() * R.transpose();
    l.inertia = 0.5 * (I + I.transpose());
    m.joints.push_back(j);
    m.links.push_back(l);
  }
  m.ee_translation = random_vec3(rng, 0.5);
  m.ee_rotation = quat_exp(random_vec3(rng, 1.0));
  return m;
}

bool models_identical(const ChainModel& a, const ChainModel& b) {
  if (a.dof() != b.dof()) return false;
  for (int i = 0; i < a.dof(); ++i) {
    if (a.joints[i].axis != b.joints[i].axis) return false;
    if (a.joints[i].origin_translation != b.joints[i].origin_translation) return false;
    if (a.joints[i].origin_rotation.coeffs() != b.joints[i].origin_rotation.coeffs()) return false;
    if (a.joints[i].position_lower != b.joints[i].position_lower) return false;
    if (a.joints[i].position_upper != b.joints[i].position_upper) return false;
    if (a.joints[i].torque_limit != b.joints[i].torque_limit) return false;
    if (a.joints[i].viscous_damping != b.joints[i].viscous_damping) return false;
    if (a.links[i].mass != b.links[i].mass) return false;
    if (a.links[i].com_offset != b.links[i].com_offset) return false;
    if (a.links[i].inertia != b.links[i].inertia) return false;
  }
  return a.ee_translation == b.ee_translation &&
         a.ee_rotation.coeffs() == b.ee_rotation.coeffs();
}

}  // namespace

TEST_CASE("canonical two-joint document parses to the planar arm") {
  const ChainModel m = parse_chain(read_file(std::string(ARMSTAB_DATA_DIR) + "/arms/planar2.chain"));
  REQUIRE(m.dof() == 2);
  CHECK(m.joints[0].axis == Vec3::UnitZ());
  CHECK(m.links[0].mass == 1.0);
  CHECK(m.joints[1].origin_translation.x() == 1.0);
  const FkResult fk = forward_kinematics(m, VecX::Zero(2));
  CHECK(fk.ee.position.isApprox(Vec3(2.0, 0.0, 0.0), 1e-12));
}

TEST_CASE("empty document is a syntax error naming the missing joints") {
  try {
    parse_chain("");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("no joints defined") != std::string::npos);
  }
}

TEST_CASE("parse errors carry line information") {
  const std::string doc =
      "[joint]\n"
      "axis = 0, 0, 1\n"
      "bogus_key = 1\n"
      "[link]\n"
      "mass = 1\n"
      "inertia = 1, 1, 1, 0, 0, 0\n"
      "[end_effector]\n"
      "translation = 1, 0, 0\n";
  try {
    parse_chain(doc);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_chain("[joint]\naxis = 0, 0, x\n"), ParseError);
  CHECK_THROWS_AS(parse_chain("[joint]\naxis 0 0 1\n"), ParseError);
  CHECK_THROWS_AS(parse_chain("[banana]\n"), ParseError);
  CHECK_THROWS_AS(parse_chain("[joint]\naxis = 0,0,1\naxis = 0,0,1\n"), ParseError);
}

TEST_CASE("missing required keys produce semantic errors with field paths") {
  const std::string doc =
      "[joint]\naxis = 0, 0, 1\n"
      "[link]\ninertia = 1, 1, 1, 0, 0, 0\n"
      "[end_effector]\ntranslation = 1, 0, 0\n";
  try {
    parse_chain(doc);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("link[0].mass") != std::string::npos);
  }
}

TEST_CASE("parser rejects semantically invalid models with the violation text") {
  const std::string doc =
      "[joint]\naxis = 1, 1, 0\n"
      "[link]\nmass = 1\ninertia = 1, 1, 1, 0, 0, 0\n"
      "[end_effector]\ntranslation = 1, 0, 0\n";
  try {
    parse_chain(doc);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("axis not unit") != std::string::npos);
  }
}

TEST_CASE("parse-serialize-parse round trip is exact on random valid models") {
  CounterRng rng(2024, 11);
  for (int trial = 0; trial < 50; ++trial) {
    const ChainModel m = random_model(rng);
    REQUIRE(validate(m).empty());
    const std::string text = serialize_chain(m);
    const ChainModel m2 = parse_chain(text);
    REQUIRE(models_identical(m, m2));
    // idempotence of the canonical form
    const ChainModel m3 = parse_chain(serialize_chain(m2));
    REQUIRE(models_identical(m2, m3));
    REQUIRE(serialize_chain(m2) == serialize_chain(m3));
  }
}

TEST_CASE("builtin toy arms validate cleanly") {
  for (int n : {1, 2, 4}) CHECK(validate(builtin_toy_arm(n)).empty());
  CHECK_THROWS_AS(builtin_toy_arm(3), std::invalid_argument);
  CHECK_THROWS_AS(builtin_toy_arm(0), std::invalid_argument);
}

TEST_CASE("validate names the joint and rule for a non-unit axis") {
  ChainModel m = builtin_toy_arm(2);
  m.joints[1].axis = Vec3(1.0, 1.0, 0.0);
  const auto vs = validate(m);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].field == "joint[1].axis");
  CHECK(vs[0].rule == "axis not unit");
}

TEST_CASE("validate flags principal moments violating the triangle inequality") {
  ChainModel m = builtin_toy_arm(2);
  // principal moments (1, 1, 3) hidden in a rotated frame; 1 + 1 < 3
  const Mat3 R = quat_exp(Vec3(0.3, -0.2, 0.8)).toRotationMatrix();
  const Mat3 I = R * Vec3(1.0, 1.0, 3.0).asDiagonal() * R.transpose();
  m.links[0].inertia = 0.5 * (I + I.transpose());
  // independent check via eigendecomposition
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m.links[0].inertia);
  REQUIRE(eig.eigenvalues()(2) > eig.eigenvalues()(0) + eig.eigenvalues()(1) + 1e-9);
  CHECK(has_violation(validate(m), "link[0].inertia", "triangle inequality"));
}

TEST_CASE("every type invariant has a failing fixture") {
  const ChainModel base = builtin_toy_arm(2);

  ChainModel m = base;
  m.links[0].mass = 0.0;
  CHECK(has_violation(validate(m), "link[0].mass", "positive"));

  m = base;
  m.links[1].inertia = -Mat3::Identity();
  CHECK(has_violation(validate(m), "link[1].inertia", "positive definite"));

  m = base;
  m.links[0].inertia(0, 1) = 0.5;  // asymmetric
  CHECK(has_violation(validate(m), "link[0].inertia", "symmetric"));

  m = base;
  m.joints[0].position_lower = 1.0;
  m.joints[0].position_upper = -1.0;
  CHECK(has_violation(validate(m), "joint[0].position_limits", "lower"));

  m = base;
  m.joints[1].torque_limit = 0.0;
  CHECK(has_violation(validate(m), "joint[1].torque_limit", "positive"));

  m = base;
  m.joints[0].viscous_damping = -0.1;
  CHECK(has_violation(validate(m), "joint[0].viscous_damping", "non-negative"));

  m = base;
  m.joints[0].origin_rotation = Quat(2.0, 0.0, 0.0, 0.0);
  CHECK(has_violation(validate(m), "joint[0].origin_rotation", "not unit"));

  m = base;
  m.links.pop_back();
  CHECK(has_violation(validate(m), "links", "differ"));

  m = ChainModel{};
  CHECK(has_violation(validate(m), "joints", ">= 1"));
}
