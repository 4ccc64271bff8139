#include "armstab/policy.hpp"
#include "armstab/selfcheck.hpp"
#include "test_helpers.hpp"

using namespace armstab;
using namespace armstab::testing;

TEST_CASE("observation layout: H = 1, n = 2 gives a 19-vector") {
  CHECK(observation_size(1, 2) == 19);
  CHECK(observation_size(5, 2) == 95);

  std::deque<ObsFrame> frames;
  ObsFrame f;
  f.cmd_pos = Vec3(1.0, 2.0, 3.0);
  f.cmd_quat = Quat(1.0, 0.0, 0.0, 0.0);
  f.vdot_b = Vec3(4.0, 5.0, 6.0);
  f.omega_b = Vec3(7.0, 8.0, 9.0);
  f.q = (VecX(2) << 0.1, 0.2).finished();
  f.qd = (VecX(2) << 0.3, 0.4).finished();
  f.prev_action = (VecX(2) << 0.5, 0.6).finished();
  frames.push_back(f);

  const VecX obs = assemble_observation(frames, 1, 2);
  REQUIRE(obs.size() == 19);
  CHECK(obs(0) == 1.0);   // cmd position first
  CHECK(obs(3) == 1.0);   // then quaternion w
  CHECK(obs(7) == 4.0);   // vdot_b
  CHECK(obs(10) == 7.0);  // omega_b
  CHECK(obs(13) == 0.1);  // q
  CHECK(obs(15) == 0.3);  // qd
  CHECK(obs(17) == 0.5);  // prev action
}

TEST_CASE("default history depth is five frames") {
  const PolicyNet net = make_policy(2, VecX::Zero(2), 1);
  CHECK(net.history == 5);
  CHECK(net.obs_dim() == 95);
}

TEST_CASE("episode start zero-pads the oldest frames") {
  std::deque<ObsFrame> frames;
  for (int k = 0; k < 2; ++k) {
    ObsFrame f;
    f.q = VecX::Constant(2, 1.0 + k);
    f.qd = VecX::Zero(2);
    f.prev_action = VecX::Zero(2);
    f.cmd_quat = Quat(1.0, 0.0, 0.0, 0.0);
    frames.push_back(f);
  }
  const VecX obs = assemble_observation(frames, 5, 2);
  REQUIRE(obs.size() == 95);
  // three oldest frame slots are all zero (including the quaternion w slot)
  CHECK(obs.head(3 * 19).cwiseAbs().maxCoeff() == 0.0);
  // newest two frames carry the data, oldest first
  CHECK(obs(3 * 19 + 13) == 1.0);
  CHECK(obs(4 * 19 + 13) == 2.0);
}

TEST_CASE("policy with zero weights returns zero offsets in deterministic mode") {
  PolicyNet net = make_policy(2, (VecX(2) << 0.6, 0.8).finished(), 3);
  for (MatX& W : net.actor.W) W.setZero();
  for (VecX& b : net.actor.b) b.setZero();
  CounterRng rng(5);
  VecX obs(net.obs_dim());
  for (int i = 0; i < obs.size(); ++i) obs(i) = rng.uniform(-1.0, 1.0);
  const PolicySample s = policy_forward(net, obs, true);
  CHECK(s.action.norm() == 0.0);
}

TEST_CASE("policy offsets never exceed the action scale") {
  PolicyNet net = make_policy(2, VecX::Zero(2), 3);
  CounterRng big(17);
  for (MatX& W : net.actor.W)
    for (int i = 0; i < W.size(); ++i) W.data()[i] = big.uniform(-5.0, 5.0);
  CounterRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    VecX obs(net.obs_dim());
    for (int i = 0; i < obs.size(); ++i) obs(i) = rng.uniform(-3.0, 3.0);
    const PolicySample s = policy_forward(net, obs, false, &rng);
    CHECK(s.action.cwiseAbs().maxCoeff() <= net.action_scale);
  }
}

TEST_CASE("tanh-squashed log-probability integrates to one (1-D quadrature)") {
  PolicyNet net = make_policy(1, VecX::Zero(1), 7, 1, 0.5, {4});
  net.log_std(0) = -0.7;
  CounterRng rng(5);
  VecX obs(net.obs_dim());
  for (int i = 0; i < obs.size(); ++i) obs(i) = rng.uniform(-1.0, 1.0);
  const VecX mean = net.actor.forward(obs.cwiseProduct(net.obs_scale));

  // integrate the action-space density over (-scale, scale)
  const double s = net.action_scale;
  const int N = 20000;
  double integral = 0.0;
  for (int k = 0; k < N; ++k) {
    const double a = -s + (k + 0.5) * (2.0 * s / N);
    const double u = std::atanh(std::clamp(a / s, -1.0 + 1e-12, 1.0 - 1e-12));
    VecX uv(1);
    uv << u;
    integral += std::exp(policy_log_prob(net, mean, uv)) * (2.0 * s / N);
  }
  CHECK(integral == Catch::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("reward terms follow the table") {
  const RewardWeights w;
  TaskCommand cmd;
  cmd.x_des.position = Vec3(1.0, 0.0, 0.0);
  Pose ee = cmd.x_des;
  const VecX zero2 = VecX::Zero(2);

  SECTION("matched torque zeroes the guide penalty and maxes the exp form") {
    VecX tau = (VecX(2) << 3.0, -1.0).finished();
    const RewardBreakdown r =
        compute_reward(ee, Vec6::Zero(), tau, tau, cmd, zero2, zero2, w);
    CHECK(r.torque_guide_lin == 0.0);
    CHECK(r.torque_guide_exp == 5.0);
  }

  SECTION("position error inside the 0.05 m tolerance still scores 10") {
    Pose off = ee;
    off.position += Vec3(0.04, 0.0, 0.0);
    const RewardBreakdown r =
        compute_reward(off, Vec6::Zero(), zero2, zero2, cmd, zero2, zero2, w);
    CHECK(r.position == 10.0);
  }

  SECTION("orientation error inside the 0.1 rad tolerance still scores 10") {
    Pose off = ee;
    off.orientation = quat_exp(Vec3(0.0, 0.0, 0.08)) * off.orientation;
    const RewardBreakdown r =
        compute_reward(off, Vec6::Zero(), zero2, zero2, cmd, zero2, zero2, w);
    CHECK(r.orientation == 10.0);
  }

  SECTION("perfect step scores the table maximum 37") {
    const RewardBreakdown r =
        compute_reward(ee, Vec6::Zero(), zero2, zero2, cmd, zero2, zero2, w);
    CHECK(r.total() == Catch::Approx(37.0).margin(1e-12));
  }

  SECTION("breakdown sums to the scalar total for random inputs") {
    CounterRng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      Pose p;
      p.position = random_vec3(rng);
      p.orientation = quat_exp(random_vec3(rng));
      Vec6 a;
      a << random_vec3(rng, 5.0), random_vec3(rng, 5.0);
      VecX t1 = random_vec(2, rng, 3.0), t2 = random_vec(2, rng, 3.0);
      VecX a1 = random_vec(2, rng), a2 = random_vec(2, rng);
      const RewardBreakdown r = compute_reward(p, a, t1, t2, cmd, a1, a2, w);
      const double manual = r.alive + r.position + r.orientation + r.torque_guide_lin +
                            r.torque_guide_exp + r.ee_lin_acc_lin + r.ee_lin_acc_exp +
                            r.ee_ang_acc_lin + r.ee_ang_acc_exp + r.action_rate;
      CHECK(r.total() == manual);

      // independent evaluation of the table formulas
      const double tau_err = (t1 - t2).norm();
      CHECK(r.torque_guide_lin == Catch::Approx(-0.1 * tau_err).margin(1e-14));
      CHECK(r.torque_guide_exp == Catch::Approx(5.0 * std::exp(-tau_err)).margin(1e-12));
      const double lin = a.head<3>().norm();
      CHECK(r.ee_lin_acc_lin == Catch::Approx(-0.1 * lin).margin(1e-14));
      CHECK(r.ee_lin_acc_exp == Catch::Approx(std::exp(-lin * lin / 9.0)).margin(1e-12));
      const double ang = a.tail<3>().norm();
      CHECK(r.ee_ang_acc_lin == Catch::Approx(-0.01 * ang).margin(1e-14));
      CHECK(r.ee_ang_acc_exp == Catch::Approx(std::exp(-ang * ang / 100.0)).margin(1e-12));
      CHECK(r.action_rate == Catch::Approx(-0.1 * (a1 - a2).norm()).margin(1e-14));
    }
  }
}

TEST_CASE("PPO internals: gradients, zero-advantage invariance, GAE(1) = MC") {
  const CheckResult r = selfcheck::ppo_internals_check();
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("clipped samples contribute no policy gradient") {
  const int dof = 2;
  PolicyNet policy = make_policy(dof, VecX::Zero(dof), 11);
  Mlp critic;
  {
    CounterRng rng(11, 1);
    critic = Mlp::make({policy.obs_dim(), 4, 1}, rng);
  }

  CounterRng rng(11, 2);
  Transition tr;
  tr.obs = VecX(policy.obs_dim());
  for (int i = 0; i < tr.obs.size(); ++i) tr.obs(i) = rng.uniform(-1.0, 1.0);
  const PolicySample s = policy_forward(policy, tr.obs, false, &rng);
  tr.u = s.u;
  tr.action = s.action;
  // old log-prob far below the current one: ratio = 1.5 > 1 + clip
  tr.logp = s.logp - std::log(1.5);
  tr.value = 0.0;
  tr.reward = 1.0;  // positive advantage
  tr.episode_end = true;

  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  cfg.epochs = 1;
  cfg.minibatch = 1;
  Adam actor_opt, critic_opt;
  AdamVec logstd_opt;
  actor_opt.init(policy.actor);
  critic_opt.init(critic);
  logstd_opt.init(dof);

  const VecX before = policy.actor.flatten();
  CounterRng shuffle(11, 3);
  std::vector<Transition> batch = {tr};
  ppo_update(batch, policy, critic, actor_opt, logstd_opt, critic_opt, cfg, shuffle);
  CHECK((policy.actor.flatten() - before).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("GAE with lambda below one differs from Monte-Carlo, lambda one matches") {
  std::vector<Transition> ep(3);
  const double rewards[3] = {1.0, -2.0, 0.5};
  const double values[3] = {0.3, -0.1, 0.2};
  for (int t = 0; t < 3; ++t) {
    ep[t].reward = rewards[t];
    ep[t].value = values[t];
    ep[t].episode_end = (t == 2);
  }
  VecX adv1, ret1, adv2, ret2;
  compute_gae(ep, 0.9, 1.0, adv1, ret1);
  compute_gae(ep, 0.9, 0.5, adv2, ret2);
  for (int t = 0; t < 3; ++t) {
    double mc = 0.0;
    for (int k = t; k < 3; ++k) mc += std::pow(0.9, k - t) * rewards[k];
    CHECK(adv1(t) == Catch::Approx(mc - values[t]).margin(1e-12));
    CHECK(ret1(t) == Catch::Approx(mc).margin(1e-12));
  }
  CHECK(std::abs(adv1(0) - adv2(0)) > 1e-6);
}

TEST_CASE("training with zero iterations returns the freshly initialized policy") {
  const ChainModel m = builtin_toy_arm(2);
  TrainSetup setup;
  setup.model = m;
  setup.q_nominal = (VecX(2) << 0.6, 0.8).finished();
  setup.cmd.x_des = forward_kinematics(m, setup.q_nominal).ee;
  setup.sim.duration = 1.0;

  PpoConfig cfg;
  cfg.iterations = 0;
  cfg.seed = 77;
  const TrainResult result = train(setup, cfg, RewardWeights{});
  CHECK(result.curve.empty());

  const PolicyNet fresh = make_policy(2, setup.q_nominal, 77, setup.history, setup.action_scale);
  CHECK(result.policy.actor.flatten() == fresh.actor.flatten());
  CHECK(result.policy.log_std == fresh.log_std);
}

TEST_CASE("training curves are bitwise reproducible for a fixed seed") {
  const ChainModel m = builtin_toy_arm(2);
  TrainSetup setup;
  setup.model = m;
  setup.q_nominal = (VecX(2) << 0.6, 0.8).finished();
  setup.cmd.x_des = forward_kinematics(m, setup.q_nominal).ee;
  setup.sim.duration = 1.0;  // short episodes for the smoke run

  PpoConfig cfg;
  cfg.iterations = 2;
  cfg.episodes_per_iteration = 1;
  cfg.minibatch = 50;
  cfg.seed = 123;

  const TrainResult a = train(setup, cfg, RewardWeights{});
  const TrainResult b = train(setup, cfg, RewardWeights{});
  REQUIRE(a.curve.size() == 2);
  CHECK(curve_to_csv(a.curve) == curve_to_csv(b.curve));
  CHECK(a.policy.actor.flatten() == b.policy.actor.flatten());
}

TEST_CASE("policy checkpoints round trip bitwise") {
  const PolicyNet net = make_policy(2, (VecX(2) << 0.6, 0.8).finished(), 99);
  const std::string text = serialize_policy(net);
  const PolicyNet back = parse_policy(text);
  CHECK(serialize_policy(back) == text);
  CHECK(back.actor.flatten() == net.actor.flatten());
  CHECK(back.q_nominal == net.q_nominal);

  CHECK_THROWS(parse_policy("format = armstab-policy-v2\n"));
  CHECK_THROWS(parse_policy("dof = 2\n"));
}

TEST_CASE("policy controller in a rollout is deterministic and rate-layered") {
  const ChainModel m = builtin_toy_arm(2);
  const VecX q0 = (VecX(2) << 0.6, 0.8).finished();
  TaskCommand cmd;
  cmd.x_des = forward_kinematics(m, q0).ee;
  const PolicyNet net = make_policy(2, q0, 5);

  SimConfig config;
  config.duration = 1.0;
  config.seed = 42;
  config.obs_noise_std = 0.01;

  PolicyController c1(net, Gains{}, /*deterministic=*/false);
  PolicyController c2(net, Gains{}, /*deterministic=*/false);
  const DisturbanceProfile profile = sample_profile(31);
  const std::string a = to_csv(rollout(m, c1, profile, cmd, config, q0));
  const std::string b = to_csv(rollout(m, c2, profile, cmd, config, q0));
  CHECK(a == b);
}
