// Built-in verification suite: the oracle checks behind `armstab verify` and
// the oracle-style acceptance criteria. Each check is self-contained and
// returns a pass flag plus a one-line measurement summary.
#pragma once

#include <sstream>

#include "armstab/eval.hpp"
#include "armstab/policy.hpp"

namespace armstab {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace selfcheck {

inline VecX random_config(const ChainModel& model, CounterRng& rng, double range = 3.0) {
  VecX q(model.dof());
  for (int i = 0; i < model.dof(); ++i) q(i) = rng.uniform(-range, range);
  return q;
}

// criterion: analytic Jacobians vs central finite differences of FK
inline CheckResult jacobian_fd_check(int configs_per_model = 1000) {
  CounterRng rng(401, 1);
  double worst = 0.0;
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < configs_per_model; ++trial) {
      const VecX q = random_config(m, rng);
      const Mat6X J = jacobian(m, q, BodyRef::end_effector());
      Mat6X J_fd(6, n);
      const double h = 1e-6;
      for (int j = 0; j < n; ++j) {
        VecX qp = q, qm = q;
        qp(j) += h;
        qm(j) -= h;
        const FkResult fp = forward_kinematics(m, qp);
        const FkResult fm = forward_kinematics(m, qm);
        J_fd.col(j).head<3>() = (fp.ee.position - fm.ee.position) / (2.0 * h);
        J_fd.col(j).tail<3>() =
            quat_log(fp.ee.orientation * fm.ee.orientation.conjugate()) / (2.0 * h);
      }
      worst = std::max(
          worst, (J - J_fd).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()));
    }
  }
  CheckResult r;
  r.name = "jacobian_fd";
  r.pass = worst < 1e-6;
  r.detail = "max relative error " + fmt_double(worst) + " (tolerance 1e-6)";
  return r;
}

// criterion: CRBA vs RNEA plus the kinetic-energy identity
inline CheckResult dynamics_consistency_check(int samples_per_model = 1000) {
  CounterRng rng(401, 2);
  double worst_id = 0.0, worst_ke = 0.0;
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < samples_per_model; ++trial) {
      const VecX q = random_config(m, rng);
      VecX qd(n), qdd(n);
      for (int i = 0; i < n; ++i) {
        qd(i) = rng.uniform(-2.0, 2.0);
        qdd(i) = rng.uniform(-2.0, 2.0);
      }
      const FkResult fk = forward_kinematics(m, q);
      const MatX M = mass_matrix(m, fk);
      const VecX lhs = M * qdd + bias_forces(m, q, qd, kDefaultGravity);
      const VecX rhs = inverse_dynamics(m, q, qd, qdd, {}, kDefaultGravity);
      worst_id = std::max(worst_id, (lhs - rhs).cwiseAbs().maxCoeff() /
                                        std::max(1.0, rhs.cwiseAbs().maxCoeff()));

      const ChainMotion motion = chain_motion(m, fk, qd, VecX::Zero(n));
      const double e_links = kinetic_energy(m, fk, motion);
      const double e_quad = 0.5 * qd.dot(M * qd);
      worst_ke = std::max(worst_ke, std::abs(e_links - e_quad) / std::max(1.0, e_links));
    }
  }
  CheckResult r;
  r.name = "dynamics_consistency";
  r.pass = worst_id < 1e-9 && worst_ke < 1e-9;
  r.detail = "CRBA/RNEA max error " + fmt_double(worst_id) + ", energy identity max error " +
             fmt_double(worst_ke) + " (tolerance 1e-9)";
  return r;
}

// criterion: undamped free-pendulum energy drift under the integrator
inline CheckResult pendulum_energy_check() {
  const ChainModel m = builtin_toy_arm(1);
  JointState s = JointState::zero(1);
  s.q << 2.0;
  const double dt = 1e-4;
  const double e0 = mechanical_energy(m, s, kDefaultGravity);
  const double e_floor = mechanical_energy(m, JointState::zero(1), kDefaultGravity);
  double drift = 0.0;
  for (int k = 0; k < 10000; ++k) {
    s = step(m, s, VecX::Zero(1), {}, dt, kDefaultGravity);
    drift = std::max(drift, std::abs(mechanical_energy(m, s, kDefaultGravity) - e0));
  }
  const double rel = drift / (e0 - e_floor);
  CheckResult r;
  r.name = "pendulum_energy";
  r.pass = rel < 1e-4;
  r.detail = "relative drift " + fmt_double(rel) + " over 1 s at dt = 1e-4 (tolerance 1e-4)";
  return r;
}

// algebraic form of the fictitious-wrench construction: moving-base inverse
// dynamics equals fixed-base inverse dynamics minus the wrench torques
inline CheckResult wrench_identity_check(int samples = 300) {
  CounterRng rng(401, 3);
  double worst = 0.0;
  for (int n : {1, 2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    for (int trial = 0; trial < samples; ++trial) {
      const VecX q = random_config(m, rng);
      VecX qd(n);
      for (int i = 0; i < n; ++i) qd(i) = rng.uniform(-2.0, 2.0);
      BaseMotionSample motion;
      for (int i = 0; i < 6; ++i) {
        motion.V_b(i) = rng.uniform(-1.5, 1.5);
        motion.A_b(i) = rng.uniform(-10.0, 10.0);
      }
      const VecX bias_moving =
          inverse_dynamics(m, q, qd, VecX::Zero(n), {}, kDefaultGravity, true, motion.seed());
      const FkResult fk = forward_kinematics(m, q);
      const ChainMotion cm = chain_motion(m, fk, qd, VecX::Zero(n));
      const auto wrenches = fictitious_wrenches(m, fk, cm, motion);
      VecX tau_w = VecX::Zero(n);
      for (int i = 0; i < n; ++i)
        tau_w += jacobian(m, fk, BodyRef::link(i)).transpose() * wrenches[i].stacked();
      const VecX rhs = bias_forces(m, q, qd, kDefaultGravity) - tau_w;
      worst = std::max(worst, (bias_moving - rhs).cwiseAbs().maxCoeff() /
                                  std::max(1.0, bias_moving.cwiseAbs().maxCoeff()));
    }
  }
  CheckResult r;
  r.name = "wrench_identity";
  r.pass = worst < 1e-9;
  r.detail = "max relative torque error " + fmt_double(worst) + " (tolerance 1e-9)";
  return r;
}

// criterion: fixed-base emulation vs the floating-base kinematic oracle
inline CheckResult wrench_equivalence_check(int trajectories = 10, double duration = 2.0) {
  double worst_rms = 0.0;
  for (int n : {2, 4}) {
    const ChainModel m = builtin_toy_arm(n);
    VecX q0(n);
    if (n == 2)
      q0 << 0.5, 0.8;
    else
      q0 << 0.3, 1.3, -0.3, 1.1;
    TaskCommand cmd;
    cmd.x_des = forward_kinematics(m, q0).ee;

    SimConfig config;
    config.duration = duration;
    config.dt_physics = 1e-4;
    config.torque_limits_on = false;

    for (int trial = 0; trial < trajectories; ++trial) {
      const BaseTrajectory traj = BaseTrajectory::random_smooth(7000 + 100 * n + trial);
      PdHoldController c1, c2;
      const RolloutLog oracle = floating_base_oracle(m, traj, c1, cmd, config, q0);
      const RolloutLog emu = rollout(m, c2, TrajectoryMotion{traj}, cmd, config, q0);
      double rms = 0.0;
      for (size_t k = 0; k < oracle.records.size(); ++k)
        rms += (oracle.records[k].a_glob.head<3>() - emu.records[k].a_glob.head<3>()).squaredNorm();
      worst_rms = std::max(worst_rms, std::sqrt(rms / oracle.records.size()));
    }
  }
  CheckResult r;
  r.name = "wrench_equivalence";
  r.pass = worst_rms < 1e-3;
  r.detail = "worst RMS world-EE acceleration discrepancy " + fmt_double(worst_rms) +
             " m/s^2 over " + fmt_double(duration) + " s (tolerance 1e-3)";
  return r;
}

// criterion: PPO internals (gradient check, zero-advantage invariance,
// GAE(lambda = 1) = discounted Monte-Carlo on a synthetic episode)
inline CheckResult ppo_internals_check() {
  std::ostringstream detail;
  bool pass = true;

  // 1) MLP gradients vs central finite differences on an 8-4-2 net
  {
    CounterRng rng(401, 4);
    Mlp net = Mlp::make({8, 4, 2}, rng);
    VecX x(8), target(2);
    for (int i = 0; i < 8; ++i) x(i) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 2; ++i) target(i) = rng.uniform(-1.0, 1.0);

    Mlp::Trace trace;
    const VecX y = net.forward(x, &trace);
    MlpGrad grad = net.zero_grad();
    net.backward(trace, y - target, grad);  // loss = 0.5 |y - target|^2
    const VecX g = net.flatten_grad(grad);

    const VecX p0 = net.flatten();
    VecX g_fd(p0.size());
    const double h = 1e-6;
    for (int i = 0; i < p0.size(); ++i) {
      VecX p = p0;
      p(i) += h;
      net.unflatten(p);
      const double lp = 0.5 * (net.forward(x) - target).squaredNorm();
      p(i) -= 2.0 * h;
      net.unflatten(p);
      const double lm = 0.5 * (net.forward(x) - target).squaredNorm();
      g_fd(i) = (lp - lm) / (2.0 * h);
    }
    net.unflatten(p0);
    const double err = (g - g_fd).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff());
    pass = pass && err < 1e-4;
    detail << "grad FD rel err " << fmt_double(err);
  }

  // 2) zero advantages with zero entropy bonus leave the policy unchanged
  {
    const int dof = 2;
    PolicyNet policy = make_policy(dof, VecX::Zero(dof), 5);
    Mlp critic;
    {
      CounterRng rng(401, 5);
      critic = Mlp::make({policy.obs_dim(), 8, 1}, rng);
    }
    std::vector<Transition> batch;
    CounterRng rng(401, 6);
    for (int t = 0; t < 8; ++t) {
      Transition tr;
      tr.obs = VecX::Zero(policy.obs_dim());
      for (int i = 0; i < policy.obs_dim(); ++i) tr.obs(i) = rng.uniform(-1.0, 1.0);
      const PolicySample s = policy_forward(policy, tr.obs, false, &rng);
      tr.u = s.u;
      tr.action = s.action;
      tr.logp = s.logp;
      tr.value = 0.0;
      tr.reward = 0.0;  // zero rewards + zero values -> zero advantages
      tr.episode_end = (t == 7);
      batch.push_back(std::move(tr));
    }
    PpoConfig cfg;
    cfg.entropy_coef = 0.0;
    cfg.minibatch = 4;
    Adam actor_opt, critic_opt;
    AdamVec logstd_opt;
    actor_opt.init(policy.actor);
    critic_opt.init(critic);
    logstd_opt.init(dof);
    const VecX before = policy.actor.flatten();
    const VecX logstd_before = policy.log_std;
    CounterRng shuffle(401, 7);
    ppo_update(batch, policy, critic, actor_opt, logstd_opt, critic_opt, cfg, shuffle);
    const double change = (policy.actor.flatten() - before).cwiseAbs().maxCoeff() +
                          (policy.log_std - logstd_before).cwiseAbs().maxCoeff();
    pass = pass && change < 1e-12;
    detail << ", zero-adv param change " << fmt_double(change);
  }

  // 3) GAE(lambda = 1) equals discounted Monte-Carlo advantages
  {
    std::vector<Transition> ep(3);
    const double rewards[3] = {1.0, -2.0, 0.5};
    const double values[3] = {0.3, -0.1, 0.2};
    for (int t = 0; t < 3; ++t) {
      ep[t].reward = rewards[t];
      ep[t].value = values[t];
      ep[t].episode_end = (t == 2);
      ep[t].bootstrap_value = 0.0;
    }
    const double gamma = 0.9;
    VecX adv, ret;
    compute_gae(ep, gamma, 1.0, adv, ret);
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      double mc = 0.0;
      for (int k = t; k < 3; ++k) mc += std::pow(gamma, k - t) * rewards[k];
      worst = std::max(worst, std::abs(adv(t) - (mc - values[t])));
    }
    pass = pass && worst < 1e-12;
    detail << ", GAE(1) vs MC err " << fmt_double(worst);
  }

  CheckResult r;
  r.name = "ppo_internals";
  r.pass = pass;
  r.detail = detail.str();
  return r;
}

// criterion: sampled disturbance statistics (ranges plus log-period
// uniformity at the 1% Kolmogorov-Smirnov level)
inline CheckResult disturbance_stats_check(int profiles = 10000) {
  bool ranges_ok = true;
  std::vector<double> log_periods;
  for (int k = 0; k < profiles; ++k) {
    const DisturbanceProfile p = sample_profile(20000 + static_cast<std::uint64_t>(k));
    for (const DisturbanceComponent& c : p.components) {
      ranges_ok = ranges_ok && c.period >= 0.64 && c.period <= 1.28;
      ranges_ok = ranges_ok && c.impulse.cwiseAbs().maxCoeff() <= 100.0;
      ranges_ok = ranges_ok && c.sway.cwiseAbs().maxCoeff() <= 10.0;
      ranges_ok = ranges_ok && std::abs(c.phase) <= kPi;
      log_periods.push_back(std::log(c.period));
    }
  }
  std::sort(log_periods.begin(), log_periods.end());
  const double lo = std::log(0.64), hi = std::log(1.28);
  const double n = static_cast<double>(log_periods.size());
  double d = 0.0;
  for (size_t i = 0; i < log_periods.size(); ++i) {
    const double cdf = (log_periods[i] - lo) / (hi - lo);
    d = std::max(d, std::abs((i + 1) / n - cdf));
    d = std::max(d, std::abs(cdf - i / n));
  }
  const double crit = 1.63 / std::sqrt(n);  // 1% critical value, asymptotic
  CheckResult r;
  r.name = "disturbance_stats";
  r.pass = ranges_ok && d < crit;
  r.detail = "ranges " + std::string(ranges_ok ? "ok" : "VIOLATED") + ", KS statistic " +
             fmt_double(d) + " vs 1% critical " + fmt_double(crit);
  return r;
}

// criterion: double-differentiation estimator on a 120 Hz sinusoidal pose
// series, clean and with one injected spike
inline CheckResult double_diff_check() {
  const double f = 120.0, freq = 1.0, A = 0.1;
  const double w = 2.0 * kPi * freq;
  const double expected = w * w * A;  // 3.948 m/s^2

  auto make_series = [&](bool spike) {
    std::vector<Pose> poses;
    for (int i = 0; i < 241; ++i) {
      Pose p;
      p.position = Vec3(A * std::sin(w * i / f), 0.0, 0.0);
      poses.push_back(p);
    }
    if (spike) poses[120].position.x() += 0.05;
    return poses;
  };

  const AccelEstimate clean = double_diff_accel(make_series(false), f);
  double peak_clean = 0.0;
  for (const Vec3& a : clean.linear) peak_clean = std::max(peak_clean, a.norm());

  const AccelEstimate spiked = double_diff_accel(make_series(true), f);
  double worst_after_removal = 0.0;
  for (size_t i = 0; i < spiked.linear.size(); ++i) {
    bool near_spike = false;
    for (int idx : spiked.removed)
      if (std::abs(static_cast<int>(i) - idx) <= 1) near_spike = true;
    if (near_spike) continue;
    worst_after_removal = std::max(worst_after_removal, (spiked.linear[i] - clean.linear[i]).norm());
  }

  const bool clean_ok = std::abs(peak_clean - expected) / expected < 0.02;
  const bool spike_ok = !spiked.removed.empty() && worst_after_removal < 0.05 * expected;
  CheckResult r;
  r.name = "double_diff";
  r.pass = clean_ok && spike_ok;
  r.detail = "peak " + fmt_double(peak_clean) + " vs w^2 A = " + fmt_double(expected) + " (" +
             (clean_ok ? "within" : "OUTSIDE") + " 2%), " +
             std::to_string(spiked.removed.size()) + " outliers removed, residual error " +
             fmt_double(worst_after_removal);
  return r;
}

}  // namespace selfcheck

// Full verification suite; a strict superset of the oracle-style acceptance
// criteria. `quick` trims sample counts for interactive runs.
inline std::vector<CheckResult> run_verification_suite(bool quick = false) {
  using namespace selfcheck;
  std::vector<CheckResult> results;
  results.push_back(jacobian_fd_check(quick ? 100 : 1000));
  results.push_back(dynamics_consistency_check(quick ? 100 : 1000));
  results.push_back(pendulum_energy_check());
  results.push_back(wrench_identity_check(quick ? 50 : 300));
  results.push_back(wrench_equivalence_check(quick ? 2 : 10));
  results.push_back(ppo_internals_check());
  results.push_back(disturbance_stats_check(quick ? 1000 : 10000));
  results.push_back(double_diff_check());
  return results;
}

}  // namespace armstab
