// Chain-description text format.
//
// A document is a sequence of [joint]/[link] block pairs, one pair per DoF,
// followed by a single [end_effector] block. Within a block, `key = value`
// lines set fields; vectors are comma-separated reals and quaternions are
// given as w, x, y, z. Unknown or duplicate keys are errors. Required keys:
// joint.axis, link.mass, link.inertia; everything else has the documented
// default. `inertia` takes the six independent entries xx, yy, zz, xy, xz, yz.
//
// The canonical two-joint example lives at data/arms/planar2.chain.
#pragma once

#include <map>
#include <set>
#include <string>

#include "armstab/chain.hpp"
#include "armstab/keyval.hpp"

namespace armstab {

namespace detail {

struct Block {
  std::string name;
  int line = 0;
  std::map<std::string, KvEntry> kv;
};

inline Vec3 as_vec3(const KvEntry& e) {
  auto v = parse_number_list(e.value, e.line);
  if (v.size() != 3) throw ParseError(e.line, 1, "'" + e.key + "' needs 3 components");
  return Vec3(v[0], v[1], v[2]);
}

inline Quat as_quat(const KvEntry& e) {
  auto v = parse_number_list(e.value, e.line);
  if (v.size() != 4) throw ParseError(e.line, 1, "'" + e.key + "' needs 4 components (w, x, y, z)");
  return Quat(v[0], v[1], v[2], v[3]);
}

inline Mat3 as_inertia(const KvEntry& e) {
  auto v = parse_number_list(e.value, e.line);
  if (v.size() != 6)
    throw ParseError(e.line, 1, "'inertia' needs 6 components (xx, yy, zz, xy, xz, yz)");
  Mat3 m;
  m << v[0], v[3], v[4],
       v[3], v[1], v[5],
       v[4], v[5], v[2];
  return m;
}

inline void check_keys(const Block& b, const std::set<std::string>& allowed) {
  for (const auto& [key, entry] : b.kv) {
    if (!allowed.count(key))
      throw ParseError(entry.line, 1, "unknown key '" + key + "' in [" + b.name + "] block");
  }
}

}  // namespace detail

inline ChainModel parse_chain(const std::string& text) {
  auto entries = scan_keyval(text);

  std::vector<detail::Block> blocks;
  for (const KvEntry& e : entries) {
    if (e.is_section) {
      if (e.section != "joint" && e.section != "link" && e.section != "end_effector")
        throw ParseError(e.line, 1, "unknown block [" + e.section + "]");
      blocks.push_back({e.section, e.line, {}});
    } else {
      if (blocks.empty())
        throw ParseError(e.line, 1, "'" + e.key + "' appears outside any block");
      auto [it, inserted] = blocks.back().kv.emplace(e.key, e);
      if (!inserted) throw ParseError(e.line, 1, "duplicate key '" + e.key + "'");
    }
  }

  if (blocks.empty()) throw ParseError(1, 1, "no joints defined");

  ChainModel model;
  size_t i = 0;
  while (i < blocks.size() && blocks[i].name != "end_effector") {
    if (blocks[i].name != "joint")
      throw ParseError(blocks[i].line, 1, "expected [joint] block, got [" + blocks[i].name + "]");
    if (i + 1 >= blocks.size() || blocks[i + 1].name != "link")
      throw ParseError(blocks[i].line, 1, "[joint] block without a matching [link] block");
    const detail::Block& jb = blocks[i];
    const detail::Block& lb = blocks[i + 1];
    const std::string jpath = "joint[" + std::to_string(model.joints.size()) + "]";
    const std::string lpath = "link[" + std::to_string(model.links.size()) + "]";

    detail::check_keys(jb, {"axis", "origin_translation", "origin_rotation", "position_limits",
                            "torque_limit", "viscous_damping"});
    detail::check_keys(lb, {"mass", "com_offset", "inertia"});

    JointSpec j;
    if (!jb.kv.count("axis"))
      throw ParseError(jb.line, 1, jpath + ".axis: required key missing");
    j.axis = detail::as_vec3(jb.kv.at("axis"));
    if (jb.kv.count("origin_translation"))
      j.origin_translation = detail::as_vec3(jb.kv.at("origin_translation"));
    if (jb.kv.count("origin_rotation"))
      j.origin_rotation = detail::as_quat(jb.kv.at("origin_rotation"));
    if (jb.kv.count("position_limits")) {
      const KvEntry& e = jb.kv.at("position_limits");
      auto v = parse_number_list(e.value, e.line);
      if (v.size() != 2) throw ParseError(e.line, 1, "'position_limits' needs 2 components");
      j.position_lower = v[0];
      j.position_upper = v[1];
    }
    if (jb.kv.count("torque_limit"))
      j.torque_limit = parse_scalar(jb.kv.at("torque_limit").value, jb.kv.at("torque_limit").line);
    if (jb.kv.count("viscous_damping"))
      j.viscous_damping =
          parse_scalar(jb.kv.at("viscous_damping").value, jb.kv.at("viscous_damping").line);

    LinkSpec l;
    if (!lb.kv.count("mass")) throw ParseError(lb.line, 1, lpath + ".mass: required key missing");
    l.mass = parse_scalar(lb.kv.at("mass").value, lb.kv.at("mass").line);
    if (lb.kv.count("com_offset")) l.com_offset = detail::as_vec3(lb.kv.at("com_offset"));
    if (!lb.kv.count("inertia"))
      throw ParseError(lb.line, 1, lpath + ".inertia: required key missing");
    l.inertia = detail::as_inertia(lb.kv.at("inertia"));

    model.joints.push_back(j);
    model.links.push_back(l);
    i += 2;
  }

  if (model.joints.empty()) throw ParseError(blocks[0].line, 1, "no joints defined");

  if (i >= blocks.size())
    throw ParseError(blocks.back().line, 1, "missing [end_effector] block");
  const detail::Block& eb = blocks[i];
  detail::check_keys(eb, {"translation", "rotation"});
  if (eb.kv.count("translation")) model.ee_translation = detail::as_vec3(eb.kv.at("translation"));
  if (eb.kv.count("rotation")) model.ee_rotation = detail::as_quat(eb.kv.at("rotation"));
  if (i + 1 < blocks.size())
    throw ParseError(blocks[i + 1].line, 1, "content after [end_effector] block");

  auto violations = validate(model);
  if (!violations.empty())
    throw std::invalid_argument("invalid chain model: " + describe(violations));
  return model;
}

inline std::string serialize_chain(const ChainModel& model) {
  std::string s;
  auto vec = [](const Vec3& v) {
    return fmt_double(v.x()) + ", " + fmt_double(v.y()) + ", " + fmt_double(v.z());
  };
  auto quat = [](const Quat& q) {
    return fmt_double(q.w()) + ", " + fmt_double(q.x()) + ", " + fmt_double(q.y()) + ", " +
           fmt_double(q.z());
  };
  for (int i = 0; i < model.dof(); ++i) {
    const JointSpec& j = model.joints[i];
    const LinkSpec& l = model.links[i];
    s += "[joint]\n";
    s += "axis = " + vec(j.axis) + "\n";
    s += "origin_translation = " + vec(j.origin_translation) + "\n";
    s += "origin_rotation = " + quat(j.origin_rotation) + "\n";
    s += "position_limits = " + fmt_double(j.position_lower) + ", " +
         fmt_double(j.position_upper) + "\n";
    s += "torque_limit = " + fmt_double(j.torque_limit) + "\n";
    s += "viscous_damping = " + fmt_double(j.viscous_damping) + "\n";
    s += "\n[link]\n";
    s += "mass = " + fmt_double(l.mass) + "\n";
    s += "com_offset = " + vec(l.com_offset) + "\n";
    s += "inertia = " + fmt_double(l.inertia(0, 0)) + ", " + fmt_double(l.inertia(1, 1)) + ", " +
         fmt_double(l.inertia(2, 2)) + ", " + fmt_double(l.inertia(0, 1)) + ", " +
         fmt_double(l.inertia(0, 2)) + ", " + fmt_double(l.inertia(1, 2)) + "\n\n";
  }
  s += "[end_effector]\n";
  s += "translation = " + vec(model.ee_translation) + "\n";
  s += "rotation = " + quat(model.ee_rotation) + "\n";
  return s;
}

}  // namespace armstab
