// Experiment configuration: one flat key-value file (same grammar as the
// chain format) drives every CLI subcommand. Unknown keys are errors so
// typos cannot silently change an experiment.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "armstab/chain_io.hpp"
#include "armstab/eval.hpp"
#include "armstab/policy.hpp"

namespace armstab {

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text) {
    ConfigFile cfg;
    std::string section;
    for (const KvEntry& e : scan_keyval(text)) {
      if (e.is_section) {
        section = e.section;
        continue;
      }
      const std::string key = section.empty() ? e.key : section + "." + e.key;
      if (!cfg.entries_.emplace(key, e).second)
        throw ParseError(e.line, 1, "duplicate key '" + key + "'");
    }
    return cfg;
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  double number(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    return parse_scalar(it->second.value, it->second.line);
  }

  int integer(const std::string& key, int fallback) {
    const double x = number(key, static_cast<double>(fallback));
    if (std::abs(x - std::round(x)) > 1e-9)
      throw std::invalid_argument("config: '" + key + "' must be an integer");
    return static_cast<int>(std::llround(x));
  }

  bool flag(const std::string& key, bool fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    if (it->second.value == "true" || it->second.value == "1") return true;
    if (it->second.value == "false" || it->second.value == "0") return false;
    throw ParseError(it->second.line, 1, "'" + key + "' must be true/false");
  }

  std::string text(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    return it->second.value;
  }

  VecX vector(const std::string& key, const VecX& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    const auto v = parse_number_list(it->second.value, it->second.line);
    VecX out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out(static_cast<long>(i)) = v[i];
    return out;
  }

  // Call after all consumers ran; rejects keys nothing read.
  void check_all_consumed() const {
    for (const auto& [key, entry] : entries_) {
      if (!consumed_.count(key))
        throw ParseError(entry.line, 1, "unknown config key '" + key + "'");
    }
  }

 private:
  std::map<std::string, KvEntry> entries_;
  std::set<std::string> consumed_;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

// "builtin:<name>" or a chain-description file path.
inline ChainModel resolve_chain(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) {
    const std::string name = spec.substr(8);
    if (name == "pendulum") return builtin_toy_arm(1);
    if (name == "planar2") return builtin_toy_arm(2);
    if (name == "spatial4") return builtin_toy_arm(4);
    throw std::invalid_argument("unknown builtin chain '" + name + "'");
  }
  return parse_chain(read_text_file(spec));
}

// Operating postures the experiments default to (away from singularities).
inline VecX default_posture(const ChainModel& model) {
  VecX q(model.dof());
  switch (model.dof()) {
    case 1: q << 0.6; break;
    case 2: q << 0.6, 0.8; break;
    case 4: q << 0.3, 1.3, -0.3, 1.1; break;
    default:
      for (int i = 0; i < model.dof(); ++i) q(i) = (i % 2 == 0) ? 0.4 : 0.8;
  }
  return q;
}

struct ExperimentConfig {
  std::string chain = "builtin:spatial4";
  std::string profile_path;  // optional input profile for simulate
  std::string policy_path;   // optional policy checkpoint for bench/simulate
  std::uint64_t seed = 1;
  VecX q_nominal;            // empty -> default_posture(model)

  SimConfig sim;
  Gains gains;
  SampleRanges ranges;
  RewardWeights rewards;
  PpoConfig ppo;

  double train_episode_seconds = 10.0;
  double train_joint_damping = 0.05;
  double train_obs_noise = 0.005;
  double action_scale = 0.6;
  int history = 5;

  BenchConfig bench;
  std::vector<std::string> bench_methods = {"pd_hold", "task_only", "ideal"};
};

inline ExperimentConfig load_experiment_config(const std::string& text) {
  ConfigFile cfg = ConfigFile::parse(text);
  ExperimentConfig out;

  out.chain = cfg.text("experiment.chain", out.chain);
  out.profile_path = cfg.text("experiment.profile", "");
  out.policy_path = cfg.text("experiment.policy", "");
  out.seed = static_cast<std::uint64_t>(cfg.number("experiment.seed", 1.0));
  out.q_nominal = cfg.vector("experiment.q_nominal", VecX());

  out.sim.dt_physics = cfg.number("sim.dt_physics", out.sim.dt_physics);
  out.sim.control_rate = cfg.number("sim.control_rate", out.sim.control_rate);
  out.sim.pd_rate = cfg.number("sim.pd_rate", out.sim.pd_rate);
  out.sim.duration = cfg.number("sim.duration", out.sim.duration);
  out.sim.obs_noise_std = cfg.number("sim.obs_noise_std", out.sim.obs_noise_std);
  out.sim.torque_limits_on = cfg.flag("sim.torque_limits_on", out.sim.torque_limits_on);
  {
    Vec3 g = kDefaultGravity;
    const VecX gv = cfg.vector("sim.gravity", VecX());
    if (gv.size() == 3) g = Vec3(gv(0), gv(1), gv(2));
    else if (gv.size() != 0) throw std::invalid_argument("config: sim.gravity needs 3 components");
    out.sim.gravity = g;
  }
  out.sim.seed = out.seed;

  {
    const VecX kp = cfg.vector("gains.kp_op", VecX());
    if (kp.size() == 6) out.gains.kp_op = kp.head<6>();
    else if (kp.size() == 1) out.gains.kp_op = kp(0) * Vec6::Ones();
    else if (kp.size() != 0) throw std::invalid_argument("config: gains.kp_op needs 1 or 6 values");
    const VecX kd = cfg.vector("gains.kd_op", VecX());
    if (kd.size() == 6) out.gains.kd_op = kd.head<6>();
    else if (kd.size() == 1) out.gains.kd_op = kd(0) * Vec6::Ones();
    else if (kd.size() != 0) throw std::invalid_argument("config: gains.kd_op needs 1 or 6 values");
  }
  out.gains.kp = cfg.number("gains.kp", out.gains.kp);
  out.gains.kd = cfg.number("gains.kd", out.gains.kd);

  out.ranges.components = cfg.integer("disturbance.components", out.ranges.components);
  out.ranges.period_lo = cfg.number("disturbance.period_lo", out.ranges.period_lo);
  out.ranges.period_hi = cfg.number("disturbance.period_hi", out.ranges.period_hi);
  out.ranges.impulse_lo = cfg.number("disturbance.impulse_lo", out.ranges.impulse_lo);
  out.ranges.impulse_hi = cfg.number("disturbance.impulse_hi", out.ranges.impulse_hi);
  out.ranges.sway_lo = cfg.number("disturbance.sway_lo", out.ranges.sway_lo);
  out.ranges.sway_hi = cfg.number("disturbance.sway_hi", out.ranges.sway_hi);
  out.ranges.impulse_std = cfg.number("disturbance.impulse_std", out.ranges.impulse_std);

  out.rewards.alive = cfg.number("reward.alive", out.rewards.alive);
  out.rewards.position_weight = cfg.number("reward.position_weight", out.rewards.position_weight);
  out.rewards.position_std = cfg.number("reward.position_std", out.rewards.position_std);
  out.rewards.position_tol = cfg.number("reward.position_tol", out.rewards.position_tol);
  out.rewards.orientation_weight =
      cfg.number("reward.orientation_weight", out.rewards.orientation_weight);
  out.rewards.orientation_std = cfg.number("reward.orientation_std", out.rewards.orientation_std);
  out.rewards.orientation_tol = cfg.number("reward.orientation_tol", out.rewards.orientation_tol);
  out.rewards.torque_guide_linear =
      cfg.number("reward.torque_guide_linear", out.rewards.torque_guide_linear);
  out.rewards.torque_guide_exp = cfg.number("reward.torque_guide_exp", out.rewards.torque_guide_exp);
  out.rewards.ee_lin_linear = cfg.number("reward.ee_lin_linear", out.rewards.ee_lin_linear);
  out.rewards.ee_lin_exp = cfg.number("reward.ee_lin_exp", out.rewards.ee_lin_exp);
  out.rewards.ee_lin_std = cfg.number("reward.ee_lin_std", out.rewards.ee_lin_std);
  out.rewards.ee_ang_linear = cfg.number("reward.ee_ang_linear", out.rewards.ee_ang_linear);
  out.rewards.ee_ang_exp = cfg.number("reward.ee_ang_exp", out.rewards.ee_ang_exp);
  out.rewards.ee_ang_std = cfg.number("reward.ee_ang_std", out.rewards.ee_ang_std);
  out.rewards.action_rate = cfg.number("reward.action_rate", out.rewards.action_rate);

  out.ppo.gamma = cfg.number("ppo.gamma", out.ppo.gamma);
  out.ppo.gae_lambda = cfg.number("ppo.gae_lambda", out.ppo.gae_lambda);
  out.ppo.clip = cfg.number("ppo.clip", out.ppo.clip);
  out.ppo.actor_lr = cfg.number("ppo.actor_lr", out.ppo.actor_lr);
  out.ppo.critic_lr = cfg.number("ppo.critic_lr", out.ppo.critic_lr);
  out.ppo.epochs = cfg.integer("ppo.epochs", out.ppo.epochs);
  out.ppo.minibatch = cfg.integer("ppo.minibatch", out.ppo.minibatch);
  out.ppo.entropy_coef = cfg.number("ppo.entropy_coef", out.ppo.entropy_coef);
  out.ppo.max_grad_norm = cfg.number("ppo.max_grad_norm", out.ppo.max_grad_norm);
  out.ppo.iterations = cfg.integer("ppo.iterations", out.ppo.iterations);
  out.ppo.episodes_per_iteration =
      cfg.integer("ppo.episodes_per_iteration", out.ppo.episodes_per_iteration);
  out.ppo.seed = out.seed;

  out.train_episode_seconds = cfg.number("train.episode_seconds", out.train_episode_seconds);
  out.train_joint_damping = cfg.number("train.joint_damping", out.train_joint_damping);
  out.train_obs_noise = cfg.number("train.obs_noise_std", out.train_obs_noise);
  out.action_scale = cfg.number("train.action_scale", out.action_scale);
  out.history = cfg.integer("train.history", out.history);

  out.bench.profiles = cfg.integer("bench.profiles", out.bench.profiles);
  out.bench.rollouts_per_cell = cfg.integer("bench.rollouts", out.bench.rollouts_per_cell);
  out.bench.profile_seed = static_cast<std::uint64_t>(
      cfg.number("bench.profile_seed", static_cast<double>(out.seed)));
  out.bench.warmup = cfg.number("bench.warmup", out.bench.warmup);
  out.bench.ranges = out.ranges;
  {
    const std::string methods = cfg.text("bench.methods", "");
    if (!methods.empty()) {
      out.bench_methods.clear();
      size_t start = 0;
      while (start <= methods.size()) {
        size_t comma = methods.find(',', start);
        std::string name =
            methods.substr(start, (comma == std::string::npos ? methods.size() : comma) - start);
        const size_t a = name.find_first_not_of(" \t");
        const size_t b = name.find_last_not_of(" \t");
        if (a != std::string::npos) out.bench_methods.push_back(name.substr(a, b - a + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
  }

  cfg.check_all_consumed();
  out.sim.check();
  out.ppo.check();
  out.ranges.check();
  return out;
}

}  // namespace armstab
