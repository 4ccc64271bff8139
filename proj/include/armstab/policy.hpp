// Residual policy stack: observation assembly, a small tanh MLP with
// hand-rolled reverse-mode gradients, the training reward suite, PPO with
// generalized advantage estimation, and the training loop.
//
// The policy outputs joint-target offsets around a nominal posture; a 10/0.5
// joint PD turns them into torque, the operational-space tracking torque is
// added at the summing junction, and the reward pulls the applied torque
// toward the analytic ideal tau_comp + tau_task.
#pragma once

#include <deque>

#include "armstab/sim.hpp"

namespace armstab {

// ---------------------------------------------------------------------------
// small MLP (tanh hidden layers, linear output)

struct MlpGrad {
  std::vector<MatX> dW;
  std::vector<VecX> db;

  void set_zero() {
    for (MatX& g : dW) g.setZero();
    for (VecX& g : db) g.setZero();
  }
  double squared_norm() const {
    double s = 0.0;
    for (const MatX& g : dW) s += g.squaredNorm();
    for (const VecX& g : db) s += g.squaredNorm();
    return s;
  }
  void scale(double c) {
    for (MatX& g : dW) g *= c;
    for (VecX& g : db) g *= c;
  }
};

struct Mlp {
  std::vector<MatX> W;
  std::vector<VecX> b;

  int input_size() const { return static_cast<int>(W.front().cols()); }
  int output_size() const { return static_cast<int>(W.back().rows()); }
  int layer_count() const { return static_cast<int>(W.size()); }

  static Mlp make(const std::vector<int>& widths, CounterRng& rng, double out_scale = 1.0) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    Mlp net;
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
      MatX W(widths[l + 1], widths[l]);
      const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
      for (int i = 0; i < W.rows(); ++i)
        for (int j = 0; j < W.cols(); ++j) W(i, j) = scale * rng.normal();
      if (l + 2 == widths.size()) W *= out_scale;  // small final layer steadies early training
      net.W.push_back(std::move(W));
      net.b.push_back(VecX::Zero(widths[l + 1]));
    }
    return net;
  }

  MlpGrad zero_grad() const {
    MlpGrad g;
    for (const MatX& w : W) g.dW.push_back(MatX::Zero(w.rows(), w.cols()));
    for (const VecX& bi : b) g.db.push_back(VecX::Zero(bi.size()));
    return g;
  }

  struct Trace {
    std::vector<VecX> h;  // h[0] = input, h[l] = post-activation of layer l
  };

  VecX forward(const VecX& x, Trace* trace = nullptr) const {
    if (x.size() != input_size()) throw std::invalid_argument("Mlp: input size mismatch");
    VecX h = x;
    if (trace) trace->h = {h};
    for (int l = 0; l < layer_count(); ++l) {
      h = W[l] * h + b[l];
      if (l + 1 < layer_count()) h = h.array().tanh();
      if (trace) trace->h.push_back(h);
    }
    return h;
  }

  // Accumulate d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const Trace& trace, const VecX& dy, MlpGrad& grad) const {
    VecX delta = dy;
    for (int l = layer_count() - 1; l >= 0; --l) {
      grad.dW[l] += delta * trace.h[l].transpose();
      grad.db[l] += delta;
      if (l > 0) {
        delta = W[l].transpose() * delta;
        delta.array() *= (1.0 - trace.h[l].array().square());
      }
    }
  }

  int param_count() const {
    int n = 0;
    for (size_t l = 0; l < W.size(); ++l) n += static_cast<int>(W[l].size() + b[l].size());
    return n;
  }

  VecX flatten() const {
    VecX p(param_count());
    int at = 0;
    for (size_t l = 0; l < W.size(); ++l) {
      for (int j = 0; j < W[l].cols(); ++j)
        for (int i = 0; i < W[l].rows(); ++i) p(at++) = W[l](i, j);
      for (int i = 0; i < b[l].size(); ++i) p(at++) = b[l](i);
    }
    return p;
  }

  void unflatten(const VecX& p) {
    int at = 0;
    for (size_t l = 0; l < W.size(); ++l) {
      for (int j = 0; j < W[l].cols(); ++j)
        for (int i = 0; i < W[l].rows(); ++i) W[l](i, j) = p(at++);
      for (int i = 0; i < b[l].size(); ++i) b[l](i) = p(at++);
    }
    if (at != p.size()) throw std::invalid_argument("Mlp: flat parameter size mismatch");
  }

  VecX flatten_grad(const MlpGrad& g) const {
    VecX p(param_count());
    int at = 0;
    for (size_t l = 0; l < W.size(); ++l) {
      for (int j = 0; j < W[l].cols(); ++j)
        for (int i = 0; i < W[l].rows(); ++i) p(at++) = g.dW[l](i, j);
      for (int i = 0; i < b[l].size(); ++i) p(at++) = g.db[l](i);
    }
    return p;
  }
};

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  MlpGrad m, v;
  long t = 0;

  void init(const Mlp& net) {
    m = net.zero_grad();
    v = net.zero_grad();
    t = 0;
  }

  void step(Mlp& net, const MlpGrad& g) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t l = 0; l < net.W.size(); ++l) {
      m.dW[l] = beta1 * m.dW[l] + (1.0 - beta1) * g.dW[l];
      v.dW[l] = beta2 * v.dW[l] + (1.0 - beta2) * g.dW[l].cwiseProduct(g.dW[l]);
      net.W[l] -= (lr / c1) * (m.dW[l].array() / ((v.dW[l].array() / c2).sqrt() + eps)).matrix();
      m.db[l] = beta1 * m.db[l] + (1.0 - beta1) * g.db[l];
      v.db[l] = beta2 * v.db[l] + (1.0 - beta2) * g.db[l].cwiseProduct(g.db[l]);
      net.b[l] -= (lr / c1) * (m.db[l].array() / ((v.db[l].array() / c2).sqrt() + eps)).matrix();
    }
  }
};

// Adam state for a plain vector parameter (the policy log-std).
struct AdamVec {
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  VecX m, v;
  long t = 0;

  void init(int n) {
    m = VecX::Zero(n);
    v = VecX::Zero(n);
    t = 0;
  }
  void step(VecX& x, const VecX& g) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    x -= (lr / c1) * (m.array() / ((v.array() / c2).sqrt() + eps)).matrix();
  }
};

// ---------------------------------------------------------------------------
// observations

inline constexpr int kFrameFixedSize = 13;  // cmd pose 7 + vdot_b 3 + omega_b 3

struct ObsFrame {
  Vec3 cmd_pos = Vec3::Zero();
  Quat cmd_quat = Quat::Identity();
  Vec3 vdot_b = Vec3::Zero();
  Vec3 omega_b = Vec3::Zero();
  VecX q, qd, prev_action;

  int size() const { return kFrameFixedSize + 3 * static_cast<int>(q.size()); }

  void write_to(VecX& out, int at) const {
    out.segment<3>(at) = cmd_pos;
    out(at + 3) = cmd_quat.w();
    out(at + 4) = cmd_quat.x();
    out(at + 5) = cmd_quat.y();
    out(at + 6) = cmd_quat.z();
    out.segment<3>(at + 7) = vdot_b;
    out.segment<3>(at + 10) = omega_b;
    const int n = static_cast<int>(q.size());
    out.segment(at + 13, n) = q;
    out.segment(at + 13 + n, n) = qd;
    out.segment(at + 13 + 2 * n, n) = prev_action;
  }
};

inline int observation_size(int history, int dof) { return history * (kFrameFixedSize + 3 * dof); }

// Flatten the most recent `history` frames, oldest first, zero-padding the
// missing oldest frames at episode start.
inline VecX assemble_observation(const std::deque<ObsFrame>& frames, int history, int dof) {
  const int frame_size = kFrameFixedSize + 3 * dof;
  VecX obs = VecX::Zero(static_cast<long>(history) * frame_size);
  const int have = static_cast<int>(frames.size());
  const int used = std::min(have, history);
  for (int i = 0; i < used; ++i) {
    const ObsFrame& f = frames[have - used + i];
    if (f.size() != frame_size) throw std::invalid_argument("assemble_observation: frame size mismatch");
    f.write_to(obs, (history - used + i) * frame_size);
  }
  return obs;
}

// ---------------------------------------------------------------------------
// policy network

struct PolicyNet {
  Mlp actor;
  VecX log_std;        // per action dim, kept in [-4, 1]
  double action_scale = 0.6;  // rad
  VecX q_nominal;
  VecX obs_scale;      // elementwise input scaling
  int history = 5;
  int dof = 0;

  int obs_dim() const { return observation_size(history, dof); }
};

// Fixed per-channel scaling keeps the strong IMU channels from swamping the
// joint-state channels; frozen into the checkpoint.
inline VecX default_obs_scale(int history, int dof) {
  const int frame = kFrameFixedSize + 3 * dof;
  VecX scale = VecX::Ones(static_cast<long>(history) * frame);
  for (int h = 0; h < history; ++h) {
    const int at = h * frame;
    scale.segment<3>(at + 7).setConstant(0.05);   // vdot_b channels reach +-100
    scale.segment<3>(at + 10).setConstant(0.5);   // omega_b
    scale.segment(at + 13 + dof, dof).setConstant(0.25);  // qd
  }
  return scale;
}

inline PolicyNet make_policy(int dof, const VecX& q_nominal, std::uint64_t seed, int history = 5,
                             double action_scale = 0.6, std::vector<int> hidden = {64, 64}) {
  PolicyNet net;
  net.dof = dof;
  net.history = history;
  net.action_scale = action_scale;
  net.q_nominal = q_nominal;
  net.obs_scale = default_obs_scale(history, dof);
  std::vector<int> widths = {net.obs_dim()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dof);
  CounterRng rng(seed, 0xac7031ull);
  net.actor = Mlp::make(widths, rng, 0.01);
  net.log_std = VecX::Constant(dof, -1.0);  // exploration std e^-1
  return net;
}

inline double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), numerically stable
inline double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::log(2.0) - u - softplus(-2.0 * u));
}

// Log-density of action = scale * tanh(u) with u ~ N(mean, diag(std^2)).
inline double policy_log_prob(const PolicyNet& net, const VecX& mean, const VecX& u) {
  double logp = 0.0;
  for (int j = 0; j < u.size(); ++j) {
    const double sd = std::exp(net.log_std(j));
    const double z = (u(j) - mean(j)) / sd;
    logp += -0.5 * z * z - net.log_std(j) - 0.5 * std::log(2.0 * kPi);
    logp -= std::log(net.action_scale) + log_one_minus_tanh_sq(u(j));
  }
  return logp;
}

struct PolicySample {
  VecX u;       // pre-squash Gaussian variable
  VecX action;  // scale * tanh(u), the joint-target offset
  double logp = 0.0;
};

inline PolicySample policy_forward(const PolicyNet& net, const VecX& obs, bool deterministic,
                                   CounterRng* rng = nullptr) {
  if (obs.size() != net.obs_dim()) throw std::invalid_argument("policy_forward: obs size mismatch");
  const VecX mean = net.actor.forward(obs.cwiseProduct(net.obs_scale));
  PolicySample out;
  out.u = mean;
  if (!deterministic) {
    if (!rng) throw std::invalid_argument("policy_forward: stochastic sampling needs an rng");
    for (int j = 0; j < mean.size(); ++j)
      out.u(j) = mean(j) + std::exp(net.log_std(j)) * rng->normal();
  }
  out.action = net.action_scale * out.u.array().tanh().matrix();
  out.logp = policy_log_prob(net, mean, out.u);
  return out;
}

// ---------------------------------------------------------------------------
// rewards

struct RewardWeights {
  double alive = 10.0;
  double position_weight = 10.0, position_std = 0.1, position_tol = 0.05;
  double orientation_weight = 10.0, orientation_std = 0.1, orientation_tol = 0.1;
  double torque_guide_linear = -0.1;
  double torque_guide_exp = 5.0;
  double ee_lin_linear = -0.1, ee_lin_exp = 1.0, ee_lin_std = 3.0;
  double ee_ang_linear = -0.01, ee_ang_exp = 1.0, ee_ang_std = 10.0;
  double action_rate = -0.1;
};

struct RewardBreakdown {
  double alive = 0.0;
  double position = 0.0;
  double orientation = 0.0;
  double torque_guide_lin = 0.0;
  double torque_guide_exp = 0.0;
  double ee_lin_acc_lin = 0.0;
  double ee_lin_acc_exp = 0.0;
  double ee_ang_acc_lin = 0.0;
  double ee_ang_acc_exp = 0.0;
  double action_rate = 0.0;

  double torque_guide() const { return torque_guide_lin + torque_guide_exp; }
  double total() const {
    return alive + position + orientation + torque_guide_lin + torque_guide_exp +
           ee_lin_acc_lin + ee_lin_acc_exp + ee_ang_acc_lin + ee_ang_acc_exp + action_rate;
  }
};

// Tracking errors inside the tolerance margin count as zero in the
// exponential, so the tracking terms saturate at their weight there.
inline double tolerance_deadzone(double err, double tol) { return err <= tol ? 0.0 : err; }

inline RewardBreakdown compute_reward(const Pose& ee, const Vec6& a_glob, const VecX& tau_measured,
                                      const VecX& tau_ideal, const TaskCommand& cmd,
                                      const VecX& prev_action, const VecX& action,
                                      const RewardWeights& w) {
  RewardBreakdown r;
  r.alive = w.alive;

  const double pos_err = tolerance_deadzone((cmd.x_des.position - ee.position).norm(), w.position_tol);
  r.position = w.position_weight * std::exp(-pos_err * pos_err / (w.position_std * w.position_std));

  const double ori_err = tolerance_deadzone(
      orientation_error(cmd.x_des.orientation, ee.orientation).norm(), w.orientation_tol);
  r.orientation =
      w.orientation_weight * std::exp(-ori_err * ori_err / (w.orientation_std * w.orientation_std));

  const double tau_err = (tau_measured - tau_ideal).norm();
  r.torque_guide_lin = w.torque_guide_linear * tau_err;
  r.torque_guide_exp = w.torque_guide_exp * std::exp(-tau_err);

  const double lin = a_glob.head<3>().norm();
  r.ee_lin_acc_lin = w.ee_lin_linear * lin;
  r.ee_lin_acc_exp = w.ee_lin_exp * std::exp(-lin * lin / (w.ee_lin_std * w.ee_lin_std));

  const double ang = a_glob.tail<3>().norm();
  r.ee_ang_acc_lin = w.ee_ang_linear * ang;
  r.ee_ang_acc_exp = w.ee_ang_exp * std::exp(-ang * ang / (w.ee_ang_std * w.ee_ang_std));

  r.action_rate = w.action_rate * (prev_action - action).norm();
  return r;
}

// ---------------------------------------------------------------------------
// PPO

struct Transition {
  VecX obs;
  VecX u;
  VecX action;
  double reward = 0.0;
  double value = 0.0;
  double logp = 0.0;
  bool episode_end = false;     // advantage chain resets after this sample
  double bootstrap_value = 0.0; // V(s_{t+1}) at episode end (0 for terminal)
};

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  int epochs = 4;
  int minibatch = 500;
  double entropy_coef = 1e-3;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  int iterations = 200;
  int episodes_per_iteration = 4;
  std::uint64_t seed = 0;

  void check() const {
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("ppo: gamma must be in [0, 1)");
    if (!(clip > 0.0)) throw std::invalid_argument("ppo: clip must be positive");
    if (gae_lambda < 0.0 || gae_lambda > 1.0) throw std::invalid_argument("ppo: lambda in [0, 1]");
  }
};

// Backward GAE over a batch of (possibly several) episodes laid out in time
// order. Returns advantages; returns-to-go are advantage + value.
inline void compute_gae(const std::vector<Transition>& batch, double gamma, double lambda,
                        VecX& advantages, VecX& returns) {
  const int T = static_cast<int>(batch.size());
  advantages.resize(T);
  returns.resize(T);
  double gae = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const Transition& tr = batch[t];
    const double next_value =
        tr.episode_end ? tr.bootstrap_value : (t + 1 < T ? batch[t + 1].value : tr.bootstrap_value);
    const double delta = tr.reward + gamma * next_value - tr.value;
    gae = delta + gamma * lambda * (tr.episode_end ? 0.0 : gae);
    advantages(t) = gae;
    returns(t) = gae + tr.value;
  }
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
};

// Clipped-surrogate update of the actor (and log-std) plus value regression.
// Gradients flow through the hand-rolled MLP backward pass.
inline UpdateStats ppo_update(const std::vector<Transition>& batch, PolicyNet& policy, Mlp& critic,
                              Adam& actor_opt, AdamVec& logstd_opt, Adam& critic_opt,
                              const PpoConfig& cfg, CounterRng& rng) {
  cfg.check();
  if (batch.empty()) throw std::invalid_argument("ppo_update: empty batch");

  VecX advantages, returns;
  compute_gae(batch, cfg.gamma, cfg.gae_lambda, advantages, returns);
  if (cfg.normalize_advantages && batch.size() > 1) {
    const double mean = advantages.mean();
    const double sd = std::sqrt((advantages.array() - mean).square().sum() /
                                static_cast<double>(advantages.size() - 1));
    advantages = (advantages.array() - mean) / (sd + 1e-8);
  }

  const int T = static_cast<int>(batch.size());
  const int n_act = policy.dof;
  std::vector<int> idx(T);
  for (int i = 0; i < T; ++i) idx[i] = i;

  UpdateStats stats;
  int stat_count = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the deterministic counter rng
    for (int i = T - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);

    for (int start = 0; start < T; start += cfg.minibatch) {
      const int count = std::min(cfg.minibatch, T - start);
      MlpGrad actor_grad = policy.actor.zero_grad();
      VecX logstd_grad = VecX::Zero(n_act);
      MlpGrad critic_grad = critic.zero_grad();

      double mb_pg = 0.0, mb_v = 0.0, mb_kl = 0.0, mb_clip = 0.0, mb_ent = 0.0;

      for (int k = 0; k < count; ++k) {
        const Transition& tr = batch[idx[start + k]];
        const double adv = advantages(idx[start + k]);
        const double ret = returns(idx[start + k]);
        const VecX x = tr.obs.cwiseProduct(policy.obs_scale);

        Mlp::Trace trace;
        const VecX mean = policy.actor.forward(x, &trace);
        const double logp_new = policy_log_prob(policy, mean, tr.u);
        const double log_ratio = logp_new - tr.logp;
        const double ratio = std::exp(log_ratio);

        const double surr1 = ratio * adv;
        const double surr2 = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        const bool unclipped_active = surr1 <= surr2;

        // d(-min(surr1, surr2))/d(logp_new); zero when the clipped branch is active
        const double dl_dlogp = unclipped_active ? -adv * ratio : 0.0;
        if (dl_dlogp != 0.0) {
          VecX dmean(n_act);
          for (int j = 0; j < n_act; ++j) {
            const double sd = std::exp(policy.log_std(j));
            const double z = (tr.u(j) - mean(j)) / sd;
            dmean(j) = dl_dlogp * (z / sd);           // dlogp/dmean = z / sd
            logstd_grad(j) += dl_dlogp * (z * z - 1.0);  // dlogp/dlogstd
          }
          policy.actor.backward(trace, dmean, actor_grad);
        }
        logstd_grad.array() -= cfg.entropy_coef;  // entropy bonus: dH/dlogstd = 1

        Mlp::Trace vtrace;
        const double value = critic.forward(x, &vtrace)(0);
        const double verr = value - ret;
        critic.backward(vtrace, VecX::Constant(1, verr), critic_grad);

        mb_pg += -std::min(surr1, surr2);
        mb_v += 0.5 * verr * verr;
        mb_kl += (ratio - 1.0) - log_ratio;
        mb_clip += std::abs(ratio - 1.0) > cfg.clip ? 1.0 : 0.0;
        for (int j = 0; j < n_act; ++j)
          mb_ent += policy.log_std(j) + 0.5 * std::log(2.0 * kPi * std::exp(1.0));
      }

      const double inv = 1.0 / count;
      actor_grad.scale(inv);
      logstd_grad *= inv;
      critic_grad.scale(inv);

      // global-norm clip on the actor side
      const double gnorm = std::sqrt(actor_grad.squared_norm() + logstd_grad.squaredNorm());
      if (gnorm > cfg.max_grad_norm) {
        const double c = cfg.max_grad_norm / gnorm;
        actor_grad.scale(c);
        logstd_grad *= c;
      }

      actor_opt.lr = cfg.actor_lr;
      critic_opt.lr = cfg.critic_lr;
      logstd_opt.lr = cfg.actor_lr;
      actor_opt.step(policy.actor, actor_grad);
      logstd_opt.step(policy.log_std, logstd_grad);
      critic_opt.step(critic, critic_grad);
      for (int j = 0; j < n_act; ++j) policy.log_std(j) = std::clamp(policy.log_std(j), -4.0, 1.0);

      stats.policy_loss += mb_pg * inv;
      stats.value_loss += mb_v * inv;
      stats.approx_kl += mb_kl * inv;
      stats.clip_fraction += mb_clip * inv;
      stats.entropy += mb_ent * inv;
      ++stat_count;
    }
  }

  if (stat_count > 0) {
    stats.policy_loss /= stat_count;
    stats.value_loss /= stat_count;
    stats.approx_kl /= stat_count;
    stats.clip_fraction /= stat_count;
    stats.entropy /= stat_count;
  }
  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
    throw std::runtime_error("ppo_update: non-finite loss");
  return stats;
}

// ---------------------------------------------------------------------------
// policy controller (shared by training rollouts and benchmark evaluation)

class PolicyController : public Controller {
 public:
  struct TapeEntry {
    VecX obs;
    VecX u;
    VecX action;
    double logp = 0.0;
    double value = 0.0;
  };

  PolicyController(const PolicyNet& net, Gains gains = {}, bool deterministic = true,
                   const Mlp* critic = nullptr)
      : net_(&net), critic_(critic), gains_(gains), deterministic_(deterministic) {}

  std::string name() const override { return "policy"; }
  Rate rate() const override { return Rate::pd; }

  void reset(const ChainModel& model, const TaskCommand&, const VecX&, std::uint64_t seed) override {
    frames_.clear();
    tape.clear();
    prev_action_ = VecX::Zero(model.dof());
    q_des_ = net_->q_nominal;
    rng_ = std::make_unique<CounterRng>(seed, 0xac710eull);
  }

  void control_update(const CtrlContext& ctx) override {
    ObsFrame frame;
    frame.cmd_pos = ctx.cmd->x_des.position;
    frame.cmd_quat = ctx.cmd->x_des.orientation;
    frame.vdot_b = ctx.motion.vdot_b();
    frame.omega_b = ctx.motion.omega_b();
    frame.q = ctx.state.q;
    frame.qd = ctx.state.qd;
    frame.prev_action = prev_action_;
    frames_.push_back(std::move(frame));
    while (static_cast<int>(frames_.size()) > net_->history) frames_.pop_front();

    const VecX obs = assemble_observation(frames_, net_->history, net_->dof);
    const PolicySample sample = policy_forward(*net_, obs, deterministic_, rng_.get());
    q_des_ = net_->q_nominal + sample.action;

    if (record) {
      TapeEntry e;
      e.obs = obs;
      e.u = sample.u;
      e.action = sample.action;
      e.logp = sample.logp;
      if (critic_) e.value = critic_->forward(obs.cwiseProduct(net_->obs_scale))(0);
      tape.push_back(std::move(e));
    }
    prev_action_ = sample.action;
  }

  VecX torque(const CtrlContext& ctx) override {
    return pd_torque(gains_, q_des_, ctx.state) +
           task_torque(*ctx.model, ctx.state, *ctx.cmd, gains_, ctx.gravity);
  }

  bool record = false;
  std::vector<TapeEntry> tape;

 private:
  const PolicyNet* net_;
  const Mlp* critic_;
  Gains gains_;
  bool deterministic_;
  std::deque<ObsFrame> frames_;
  VecX prev_action_;
  VecX q_des_;
  std::unique_ptr<CounterRng> rng_;
};

// ---------------------------------------------------------------------------
// training

struct TrainSetup {
  ChainModel model;
  TaskCommand cmd;
  VecX q_nominal;
  SimConfig sim;                 // sim.duration = episode length
  SampleRanges ranges;           // training disturbance distribution
  Vec6 axis_scale = Vec6::Ones();  // task shaping applied after sampling
  Gains gains;
  double joint_damping = 0.05;   // friction injected during training episodes
  double obs_noise_std = 0.005;  // observation noise during training episodes
  int history = 5;
  double action_scale = 0.6;
  std::vector<int> hidden = {64, 64};
};

struct CurvePoint {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_ee_lin_acc = 0.0;
  double mean_torque_guide = 0.0;
};

struct TrainResult {
  PolicyNet policy;
  Mlp critic;
  std::vector<CurvePoint> curve;
};

namespace detail {

// Rewards are evaluated at the last physics record of each action interval,
// with the analytic ideal torque recomputed from the logged ground truth.
inline RewardBreakdown reward_at_record(const ChainModel& model, const SimRecord& rec,
                                        const TaskCommand& cmd, const Gains& gains,
                                        const Vec3& gravity, const VecX& prev_action,
                                        const VecX& action, const RewardWeights& weights) {
  BaseMotionSample motion;
  motion.V_b = rec.V_b;
  motion.A_b = rec.A_b;
  const JointState state{rec.q, rec.qd};
  const FkResult fk = forward_kinematics(model, rec.q);
  const ChainMotion cm = chain_motion(model, fk, rec.qd, VecX::Zero(model.dof()));
  const auto wrenches = fictitious_wrenches(model, fk, cm, motion);
  const VecX tau_ideal = compensation_torque(model, state, motion, wrenches) +
                         task_torque(model, state, cmd, gains, gravity);
  return compute_reward(rec.ee, rec.a_glob, rec.tau, tau_ideal, cmd, prev_action, action, weights);
}

}  // namespace detail

inline TrainResult train(const TrainSetup& setup, const PpoConfig& cfg,
                         const RewardWeights& weights) {
  cfg.check();
  setup.sim.check();

  ChainModel model = setup.model;
  for (JointSpec& j : model.joints) j.viscous_damping = std::max(j.viscous_damping, setup.joint_damping);

  TrainResult result;
  result.policy = make_policy(model.dof(), setup.q_nominal, cfg.seed, setup.history,
                              setup.action_scale, setup.hidden);
  {
    std::vector<int> widths = {result.policy.obs_dim()};
    widths.insert(widths.end(), setup.hidden.begin(), setup.hidden.end());
    widths.push_back(1);
    CounterRng rng(cfg.seed, 0xc217ull);
    result.critic = Mlp::make(widths, rng);
  }

  Adam actor_opt, critic_opt;
  AdamVec logstd_opt;
  actor_opt.init(result.policy.actor);
  critic_opt.init(result.critic);
  logstd_opt.init(model.dof());
  CounterRng shuffle_rng(cfg.seed, 0x5487ull);

  const int spc = setup.sim.steps_per_control();
  const int control_steps = setup.sim.steps() / spc;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<Transition> batch;
    double sum_reward = 0.0, sum_lin = 0.0, sum_guide = 0.0;
    int count = 0;

    for (int ep = 0; ep < cfg.episodes_per_iteration; ++ep) {
      const std::uint64_t ep_key =
          cfg.seed ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(iter) * 1000 + ep + 1));
      const DisturbanceProfile profile = scale_profile_axes(
          sample_profile(CounterRng(ep_key, 0x9420ull).next_u64(), setup.ranges),
          setup.axis_scale);

      SimConfig ep_sim = setup.sim;
      ep_sim.seed = ep_key;
      ep_sim.obs_noise_std = setup.obs_noise_std;

      PolicyController controller(result.policy, setup.gains, /*deterministic=*/false,
                                  &result.critic);
      controller.record = true;
      const RolloutLog log = rollout(model, controller, profile, setup.cmd, ep_sim, setup.q_nominal);

      // one transition per control interval; the trailing tape entry (made at
      // the final boundary) provides the bootstrap value
      const int T = std::min<int>(control_steps, static_cast<int>(controller.tape.size()) - 1);
      VecX prev_action = VecX::Zero(model.dof());
      for (int t = 0; t < T; ++t) {
        const PolicyController::TapeEntry& e = controller.tape[t];
        const SimRecord& rec = log.records[static_cast<size_t>(t + 1) * spc - 1];
        const RewardBreakdown rb = detail::reward_at_record(
            model, rec, setup.cmd, setup.gains, ep_sim.gravity, prev_action, e.action, weights);

        Transition tr;
        tr.obs = e.obs;
        tr.u = e.u;
        tr.action = e.action;
        tr.logp = e.logp;
        tr.value = e.value;
        tr.reward = rb.total();
        tr.episode_end = (t + 1 == T);
        tr.bootstrap_value = (t + 1 == T) ? controller.tape[T].value : 0.0;
        batch.push_back(std::move(tr));

        sum_reward += rb.total();
        sum_guide += rb.torque_guide();
        sum_lin += rec.a_glob.head<3>().norm();
        ++count;
        prev_action = e.action;
      }
    }

    ppo_update(batch, result.policy, result.critic, actor_opt, logstd_opt, critic_opt, cfg,
               shuffle_rng);

    CurvePoint pt;
    pt.iteration = iter;
    pt.mean_reward = sum_reward / count;
    pt.mean_ee_lin_acc = sum_lin / count;
    pt.mean_torque_guide = sum_guide / count;
    result.curve.push_back(pt);
  }
  return result;
}

// ---------------------------------------------------------------------------
// checkpoint and curve serialization

inline std::string serialize_policy(const PolicyNet& net) {
  std::string s = "format = armstab-policy-v1\n";
  s += "dof = " + std::to_string(net.dof) + "\n";
  s += "history = " + std::to_string(net.history) + "\n";
  s += "action_scale = " + fmt_double(net.action_scale) + "\n";
  s += "widths =";
  s += " " + std::to_string(net.actor.input_size());
  for (const MatX& w : net.actor.W) s += ", " + std::to_string(w.rows());
  s += "\n";
  auto emit_vec = [&s](const std::string& key, const VecX& v) {
    s += key + " = ";
    for (int i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v(i));
    s += "\n";
  };
  emit_vec("q_nominal", net.q_nominal);
  emit_vec("obs_scale", net.obs_scale);
  emit_vec("log_std", net.log_std);
  emit_vec("actor", net.actor.flatten());
  return s;
}

inline PolicyNet parse_policy(const std::string& text) {
  PolicyNet net;
  std::vector<int> widths;
  VecX actor_params;
  bool have_format = false;
  for (const KvEntry& e : scan_keyval(text)) {
    if (e.is_section) throw ParseError(e.line, 1, "policy files have no sections");
    if (e.key == "format") {
      if (e.value != "armstab-policy-v1")
        throw ParseError(e.line, 1, "unsupported policy format '" + e.value + "'");
      have_format = true;
    } else if (e.key == "dof") {
      net.dof = static_cast<int>(parse_scalar(e.value, e.line));
    } else if (e.key == "history") {
      net.history = static_cast<int>(parse_scalar(e.value, e.line));
    } else if (e.key == "action_scale") {
      net.action_scale = parse_scalar(e.value, e.line);
    } else if (e.key == "widths") {
      for (double w : parse_number_list(e.value, e.line)) widths.push_back(static_cast<int>(w));
    } else if (e.key == "q_nominal" || e.key == "obs_scale" || e.key == "log_std" ||
               e.key == "actor") {
      const auto v = parse_number_list(e.value, e.line);
      VecX vec(v.size());
      for (size_t i = 0; i < v.size(); ++i) vec(static_cast<long>(i)) = v[i];
      if (e.key == "q_nominal") net.q_nominal = vec;
      else if (e.key == "obs_scale") net.obs_scale = vec;
      else if (e.key == "log_std") net.log_std = vec;
      else actor_params = vec;
    } else {
      throw ParseError(e.line, 1, "unknown key '" + e.key + "' in policy file");
    }
  }
  if (!have_format) throw std::invalid_argument("policy file: missing format line");
  if (widths.size() < 2) throw std::invalid_argument("policy file: missing widths");
  CounterRng rng(0);
  net.actor = Mlp::make(widths, rng);
  if (actor_params.size() != net.actor.param_count())
    throw std::invalid_argument("policy file: actor parameter count mismatch");
  net.actor.unflatten(actor_params);
  if (net.obs_scale.size() != net.obs_dim())
    throw std::invalid_argument("policy file: obs_scale size mismatch");
  if (net.q_nominal.size() != net.dof || net.log_std.size() != net.dof)
    throw std::invalid_argument("policy file: vector size mismatch");
  return net;
}

inline std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string s = "iteration,mean_reward,mean_ee_lin_acc,mean_torque_guide\n";
  for (const CurvePoint& p : curve) {
    s += std::to_string(p.iteration) + "," + fmt_double(p.mean_reward) + "," +
         fmt_double(p.mean_ee_lin_acc) + "," + fmt_double(p.mean_torque_guide) + "\n";
  }
  return s;
}

}  // namespace armstab
