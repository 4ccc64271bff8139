// armstab command-line interface.
//
// Subcommands: verify | profile gen | simulate | bench | train | plot.
// Every run is reproducible from its config file plus seed; artifacts land in
// the --out directory. Exit codes: 0 success, 1 check failure, 2 usage or
// config error.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "armstab/config.hpp"
#include "armstab/plot.hpp"
#include "armstab/selfcheck.hpp"

namespace {

using namespace armstab;

ExperimentConfig load_config_or_default(const std::string& path, std::uint64_t seed_override,
                                        bool have_seed) {
  ExperimentConfig cfg;
  if (!path.empty()) cfg = load_experiment_config(read_text_file(path));
  if (have_seed) {
    cfg.seed = seed_override;
    cfg.sim.seed = seed_override;
    cfg.ppo.seed = seed_override;
    cfg.bench.profile_seed = seed_override;
  }
  return cfg;
}

struct Experiment {
  ChainModel model;
  VecX q_nominal;
  TaskCommand cmd;
};

Experiment resolve_experiment(const ExperimentConfig& cfg) {
  Experiment e;
  e.model = resolve_chain(cfg.chain);
  e.q_nominal = cfg.q_nominal.size() ? cfg.q_nominal : default_posture(e.model);
  if (e.q_nominal.size() != e.model.dof())
    throw std::invalid_argument("config: q_nominal length does not match the chain dof");
  e.cmd.x_des = forward_kinematics(e.model, e.q_nominal).ee;
  return e;
}

// method spec: name with an optional @physics/@pd/@control rate suffix
std::unique_ptr<Controller> make_method(const std::string& spec, const ExperimentConfig& cfg,
                                        const PolicyNet* policy) {
  std::string name = spec;
  Controller::Rate rate = Controller::Rate::physics;
  bool rate_given = false;
  if (const size_t at = spec.find('@'); at != std::string::npos) {
    name = spec.substr(0, at);
    const std::string r = spec.substr(at + 1);
    if (r == "physics") rate = Controller::Rate::physics;
    else if (r == "pd") rate = Controller::Rate::pd;
    else if (r == "control") rate = Controller::Rate::control;
    else throw std::invalid_argument("unknown controller rate '" + r + "'");
    rate_given = true;
  }

  if (name == "pd_hold") return std::make_unique<PdHoldController>(cfg.gains);
  if (name == "task_only")
    return std::make_unique<TaskOnlyController>(
        cfg.gains, rate_given ? rate : Controller::Rate::physics);
  if (name == "ideal")
    return std::make_unique<IdealController>(cfg.gains, true, true,
                                             rate_given ? rate : Controller::Rate::physics);
  if (name == "comp_only")
    return std::make_unique<IdealController>(cfg.gains, true, false,
                                             rate_given ? rate : Controller::Rate::physics);
  if (name == "policy") {
    if (!policy)
      throw std::invalid_argument("method 'policy' needs experiment.policy = <checkpoint path>");
    return std::make_unique<PolicyController>(*policy, cfg.gains, /*deterministic=*/true);
  }
  throw std::invalid_argument("unknown method '" + name + "'");
}

int cmd_verify(bool quick) {
  const auto results = run_verification_suite(quick);
  bool all_pass = true;
  for (const CheckResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "verify: all checks passed\n" : "verify: CHECKS FAILED\n");
  return all_pass ? 0 : 1;
}

int cmd_profile_gen(const ExperimentConfig& cfg, const std::string& out_dir, int count) {
  for (int i = 0; i < count; ++i) {
    const DisturbanceProfile p =
        sample_profile(cfg.seed + static_cast<std::uint64_t>(i), cfg.ranges);
    char name[32];
    std::snprintf(name, sizeof(name), "profile_%04d.txt", i);
    write_text_file((std::filesystem::path(out_dir) / name).string(), serialize_profile(p));
  }
  std::cout << "wrote " << count << " profile(s) to " << out_dir << "\n";
  return 0;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                 const std::string& method) {
  const Experiment e = resolve_experiment(cfg);
  const DisturbanceProfile profile = cfg.profile_path.empty()
                                         ? sample_profile(cfg.seed, cfg.ranges)
                                         : parse_profile(read_text_file(cfg.profile_path));
  PolicyNet policy;
  const PolicyNet* policy_ptr = nullptr;
  if (!cfg.policy_path.empty()) {
    policy = parse_policy(read_text_file(cfg.policy_path));
    policy_ptr = &policy;
  }
  auto controller = make_method(method, cfg, policy_ptr);
  const RolloutLog log = rollout(e.model, *controller, profile, e.cmd, cfg.sim, e.q_nominal);
  write_text_file((std::filesystem::path(out_dir) / "rollout.csv").string(), to_csv(log));

  const StabilityMetrics m = compute_metrics(log, cfg.bench.warmup);
  std::cout << "simulate: " << controller->name() << " over " << cfg.sim.duration
            << " s; mean lin " << m.mean_lin << " m/s^2, max lin " << m.max_lin
            << " m/s^2, mean ang " << m.mean_ang << " rad/s^2\n";
  std::cout << "wrote " << (std::filesystem::path(out_dir) / "rollout.csv").string() << "\n";
  return 0;
}

int cmd_bench(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Experiment e = resolve_experiment(cfg);
  PolicyNet policy;
  const PolicyNet* policy_ptr = nullptr;
  if (!cfg.policy_path.empty()) {
    policy = parse_policy(read_text_file(cfg.policy_path));
    policy_ptr = &policy;
  }

  std::vector<BenchMethod> methods;
  for (const std::string& name : cfg.bench_methods) {
    methods.push_back(
        {name, [name, &cfg, policy_ptr] { return make_method(name, cfg, policy_ptr); }});
  }
  const BenchResult result = benchmark(e.model, methods, cfg.bench, e.cmd, cfg.sim, e.q_nominal);
  write_text_file((std::filesystem::path(out_dir) / "bench.csv").string(), bench_to_csv(result));
  write_text_file((std::filesystem::path(out_dir) / "bench.md").string(),
                  bench_to_markdown(result));
  std::cout << bench_to_markdown(result);
  std::cout << "wrote bench.csv and bench.md to " << out_dir << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Experiment e = resolve_experiment(cfg);
  TrainSetup setup;
  setup.model = e.model;
  setup.cmd = e.cmd;
  setup.q_nominal = e.q_nominal;
  setup.sim = cfg.sim;
  setup.sim.duration = cfg.train_episode_seconds;
  setup.ranges = cfg.ranges;
  setup.gains = cfg.gains;
  setup.joint_damping = cfg.train_joint_damping;
  setup.obs_noise_std = cfg.train_obs_noise;
  setup.history = cfg.history;
  setup.action_scale = cfg.action_scale;

  const TrainResult result = train(setup, cfg.ppo, cfg.rewards);
  write_text_file((std::filesystem::path(out_dir) / "policy.txt").string(),
                  serialize_policy(result.policy));
  write_text_file((std::filesystem::path(out_dir) / "curve.csv").string(),
                  curve_to_csv(result.curve));
  if (!result.curve.empty()) {
    std::cout << "train: " << result.curve.size() << " iterations, final mean reward "
              << result.curve.back().mean_reward << ", final mean EE lin acc "
              << result.curve.back().mean_ee_lin_acc << " m/s^2\n";
  }
  std::cout << "wrote policy.txt and curve.csv to " << out_dir << "\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<RolloutLog> logs;
  std::vector<std::pair<std::string, const RolloutLog*>> refs;
  logs.reserve(inputs.size());
  for (const std::string& path : inputs) logs.push_back(from_csv(read_text_file(path)));
  for (size_t i = 0; i < logs.size(); ++i)
    refs.emplace_back(std::filesystem::path(inputs[i]).stem().string(), &logs[i]);
  write_text_file(out_path, plot_accel_svg(refs));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixed-base arm lab: disturbance emulation, compensation control, residual RL"};
  app.require_subcommand(1);
  app.fallthrough();  // allow --config/--out/--seed after the subcommand name

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool have_seed = false;
  app.add_option("--config", config_path, "experiment config file")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "seed override");

  auto* verify = app.add_subcommand("verify", "run the built-in oracle suites");
  bool quick = false;
  verify->add_flag("--quick", quick, "reduced sample counts");

  auto* profile = app.add_subcommand("profile", "disturbance profile tools");
  auto* profile_gen = profile->add_subcommand("gen", "sample and write disturbance profiles");
  int profile_count = 1;
  profile_gen->add_option("--count", profile_count, "number of profiles")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "roll out one controller and write the log CSV");
  std::string method = "ideal";
  simulate->add_option("--method", method, "pd_hold | task_only | ideal | comp_only | policy")
      ->capture_default_str();

  app.add_subcommand("bench", "paired benchmark across methods");
  app.add_subcommand("train", "train the residual policy with PPO");

  auto* plot = app.add_subcommand("plot", "render acceleration curves from rollout CSVs to SVG");
  std::vector<std::string> plot_inputs;
  std::string plot_out = "plot.svg";
  plot->add_option("--in", plot_inputs, "rollout CSV file(s)")->required();
  plot->add_option("--svg", plot_out, "output SVG path")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  have_seed = seed_opt->count() > 0;

  try {
    if (app.got_subcommand("verify")) return cmd_verify(quick);
    if (app.got_subcommand("plot")) return cmd_plot(plot_inputs, plot_out);

    const ExperimentConfig cfg = load_config_or_default(config_path, seed, have_seed);
    if (app.got_subcommand("profile")) {
      if (!profile->got_subcommand("gen")) {
        std::cerr << "error: 'profile' needs the 'gen' subcommand\n";
        return 2;
      }
      return cmd_profile_gen(cfg, out_dir, profile_count);
    }
    if (app.got_subcommand("simulate")) return cmd_simulate(cfg, out_dir, method);
    if (app.got_subcommand("bench")) return cmd_bench(cfg, out_dir);
    if (app.got_subcommand("train")) return cmd_train(cfg, out_dir);
  } catch (const RolloutAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
