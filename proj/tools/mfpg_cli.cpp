// mfpg: train and check mean-field policy-gradient estimators from the command line.

#include "mfpg/config.hpp"
#include "mfpg/flow.hpp"
#include "mfpg/oracle.hpp"
#include "mfpg/sweeps.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfpg;

namespace {

enum Exit { kOk = 0, kFail = 1, kConfig = 2, kNumeric = 3, kRefusal = 4 };

struct Options {
  std::string config;
  std::string env_name;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> eps;
  std::optional<std::size_t> N, n, episodes;
  std::optional<std::string> mode, baseline;
  bool sampled_validation = false;
  bool no_timing = false;

  std::string checkpoint;
  std::string theta = "init";
  std::vector<double> mu0;
  std::optional<int> T;
  std::optional<double> tolerance;
  std::vector<double> eps_list;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> N_list;
  std::size_t replications = 50;
};

void setup_logging() {
  const char* lvl = std::getenv("MFPG_LOG");
  const std::string s = lvl ? lvl : "info";
  if (s == "error") spdlog::set_level(spdlog::level::err);
  else if (s == "debug") spdlog::set_level(spdlog::level::debug);
  else if (s == "warn") spdlog::set_level(spdlog::level::warn);
  else spdlog::set_level(spdlog::level::info);
  spdlog::set_pattern("[%l] %v");
}

RunConfig resolve_config(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_run_config(o.config);
  } else if (!o.env_name.empty()) {
    cfg = parse_run_config(json{{"env", {{"name", o.env_name}}}, {"policy", {{"kind", "tabular"}}}});
  } else {
    throw ConfigError("--config", "either --config or --env is required");
  }
  // Overrides go through the JSON form so they get the same validation as file values.
  json doc = to_json(cfg);
  if (!o.out.empty()) doc["out"] = o.out;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.threads) doc["train"]["threads"] = *o.threads;
  if (o.eps) doc["train"]["eps"] = *o.eps;
  if (o.N) doc["train"]["N"] = *o.N;
  if (o.n) doc["train"]["n"] = *o.n;
  if (o.episodes) doc["train"]["episodes"] = *o.episodes;
  if (o.mode) doc["train"]["mode"] = *o.mode;
  if (o.baseline) doc["train"]["baseline"] = *o.baseline;
  if (o.sampled_validation) doc["train"]["sampled_validation"] = true;
  if (o.no_timing) doc["train"]["record_wall_time"] = false;
  return parse_run_config(doc);
}

EstimatorOptions estimator_options(const RunConfig& cfg) {
  EstimatorOptions e;
  e.eps = cfg.train.eps;
  e.N = cfg.train.N;
  e.n = cfg.train.n;
  e.mode = cfg.train.mode;
  e.baseline = cfg.train.baseline;
  e.threads = cfg.train.threads;
  return e;
}

fs::path prepare_out(const RunConfig& cfg, const std::string& command) {
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.json") << make_manifest(cfg, command, cfg.train.threads).dump(2)
                                       << '\n';
  std::ofstream(dir / "config.json") << to_json(cfg).dump(2) << '\n';
  return dir;
}

StateDist resolve_mu0(const Options& o, const RunConfig& cfg) {
  if (!o.mu0.empty()) {
    if (o.mu0.size() != cfg.env.num_states())
      throw ConfigError("--mu0", "length must equal the number of states");
    Eigen::VectorXd v(Eigen::Index(o.mu0.size()));
    for (std::size_t i = 0; i < o.mu0.size(); ++i) v[Eigen::Index(i)] = o.mu0[i];
    try {
      return StateDist(v);
    } catch (const std::exception& err) {
      throw ConfigError("--mu0", err.what());
    }
  }
  if (cfg.train.val_mu0) return *cfg.train.val_mu0;
  return StateDist::uniform(cfg.env.num_states());
}

PolicyParams resolve_theta(const Options& o, const RunConfig& cfg, const Policy& policy) {
  if (!o.checkpoint.empty()) {
    auto [spec, theta] = load_checkpoint(o.checkpoint);
    if (!(spec == cfg.policy))
      throw ConfigError("--checkpoint", "checkpoint policy does not match the configured policy");
    return theta;
  }
  if (o.theta == "zero") return policy.zero_params();
  if (o.theta == "init") return initial_theta(policy, cfg.seed);
  throw ConfigError("--theta", "expected zero|init");
}

void emit(std::ostream* file, const json& line) {
  const std::string s = line.dump();
  std::cout << s << '\n';
  if (file) *file << s << '\n';
}

int cmd_train(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(cfg, "train");
  const auto env = cfg.env.make();
  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t ep, const PolicyParams& th) {
    save_checkpoint(dir / ("checkpoint_" + std::to_string(ep) + ".json"), cfg.policy, th);
  };
  hooks.on_metrics = [](const MetricsRow& r) {
    spdlog::info("episode {:>6}  val_reward {:.6f}  grad_norm {:.4g}", r.episode, r.val_reward,
                 r.grad_norm);
  };
  const TrainResult res = train(*env, cfg.policy, cfg.train, hooks);
  write_metrics_csv(dir / "metrics.csv", res.metrics);
  save_checkpoint(dir / "checkpoint.json", cfg.policy, res.theta);
  spdlog::info("wrote {} validation rows to {}", res.metrics.size(), (dir / "metrics.csv").string());
  return kOk;
}

int cmd_grad_check(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(cfg, "grad-check");
  const auto env = cfg.env.make();
  const Policy policy(cfg.policy);
  const PolicyParams theta = resolve_theta(o, cfg, policy);
  const StateDist mu0 = resolve_mu0(o, cfg);

  const OracleReport rep = exact_gradient_decomposition(*env, policy, theta, mu0);
  const EstimatorOptions opts = estimator_options(cfg);
  const GradEstimate g = estimate_policy_gradient(*env, policy, theta, mu0, opts, RngStream(cfg.seed));

  std::ofstream file(dir / "grad_check.jsonl");
  double max_err = 0.0;
  for (Eigen::Index j = 0; j < g.grad.size(); ++j) {
    const double err = std::abs(g.grad[j] - rep.grad_fd[j]);
    max_err = std::max(max_err, err);
    emit(&file, {{"coord", j},
                 {"estimate", g.grad[j]},
                 {"oracle_fd", rep.grad_fd[j]},
                 {"abs_err", err},
                 {"mc_std", g.diagnostics.contribution_std[j] / std::sqrt(double(g.n_traj))}});
  }
  const double tol =
      o.tolerance ? *o.tolerance : 0.05 * (1.0 + rep.grad_fd.lpNorm<Eigen::Infinity>());
  const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const Decomposition& dec = *rep.decomposition;
  const bool pass = max_err <= tol;
  emit(&file, {{"rf", vec(dec.rf)},
               {"md", vec(dec.md)},
               {"mfd", vec(dec.mfd)},
               {"sum", vec(dec.sum())},
               {"fd", vec(rep.grad_fd)},
               {"decomposition_gap", rep.gap},
               {"value", rep.value},
               {"n_traj", g.n_traj},
               {"eps", g.eps},
               {"n", opts.n},
               {"mode", to_string(opts.mode)},
               {"shared_logit_gradients", g.diagnostics.shared_logit_gradients},
               {"max_abs_err", max_err},
               {"tolerance", tol},
               {"pass", pass}});
  return pass ? kOk : kFail;
}

std::vector<std::uint64_t> resolve_seeds(const Options& o, const RunConfig& cfg) {
  if (!o.seeds.empty()) return o.seeds;
  return {cfg.seed};
}

int cmd_bias_sweep(const Options& o) {
  if (o.eps_list.size() < 2) throw ConfigError("--eps-list", "need at least two eps values");
  for (double e : o.eps_list)
    if (!(e > 0.0)) throw ConfigError("--eps-list", "eps values must be positive");
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(cfg, "bias-sweep");
  const auto env = cfg.env.make();
  const Policy policy(cfg.policy);
  const PolicyParams theta = resolve_theta(o, cfg, policy);
  const StateDist mu0 = resolve_mu0(o, cfg);
  const Eigen::VectorXd fd = fd_gradient(*env, policy, theta, mu0);

  const auto rows = bias_sweep(*env, policy, theta, mu0, fd, o.eps_list, resolve_seeds(o, cfg),
                               estimator_options(cfg));
  std::ofstream csv(dir / "bias_sweep.csv");
  csv << "eps,bias_maxnorm,mc_std,seed\n";
  char buf[128];
  for (const BiasRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%llu\n", r.eps, r.bias_maxnorm, r.mc_std,
                  static_cast<unsigned long long>(r.seed));
    csv << buf;
    std::cout << buf;
  }
  std::vector<double> eps, bias;
  for (double e : o.eps_list) {
    double b = 0.0;
    std::size_t c = 0;
    for (const BiasRow& r : rows)
      if (r.eps == e) {
        b += r.bias_maxnorm;
        ++c;
      }
    eps.push_back(e);
    bias.push_back(b / double(c));
  }
  std::cout << "slope " << loglog_slope(eps, bias) << '\n';
  return kOk;
}

int cmd_mse_sweep(const Options& o) {
  if (o.N_list.size() < 2) throw ConfigError("--N-list", "need at least two N values");
  if (o.replications < 20) throw ConfigError("--replications", "need at least 20");
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(cfg, "mse-sweep");
  const auto env = cfg.env.make();
  const Policy policy(cfg.policy);
  const PolicyParams theta = resolve_theta(o, cfg, policy);
  const StateDist mu0 = resolve_mu0(o, cfg);
  const Eigen::VectorXd fd = fd_gradient(*env, policy, theta, mu0);

  const auto rows = mse_sweep(*env, policy, theta, mu0, fd, o.N_list, o.replications, cfg.seed,
                              estimator_options(cfg));
  std::ofstream csv(dir / "mse_sweep.csv");
  csv << "N,var_per_coord_max,mse_per_coord_max\n";
  char buf[128];
  std::vector<double> Ns, vars;
  for (const MseRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g\n", r.N, r.var_per_coord_max,
                  r.mse_per_coord_max);
    csv << buf;
    std::cout << buf;
    Ns.push_back(double(r.N));
    vars.push_back(r.var_per_coord_max);
  }
  std::cout << "slope " << loglog_slope(Ns, vars) << '\n';
  return kOk;
}

int cmd_flow(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(cfg, "flow");
  auto env = cfg.env.make();
  if (o.T) env = env->with_horizon(*o.T);
  const Policy policy(cfg.policy);
  const PolicyParams theta = resolve_theta(o, cfg, policy);
  const Flow flow = compute_flow(*env, policy, theta, resolve_mu0(o, cfg));
  std::ofstream csv(dir / "flow.csv");
  csv << "t,state,prob\n";
  std::cout << "t,state,prob\n";
  char buf[96];
  for (std::size_t t = 0; t < flow.dists.size(); ++t)
    for (std::size_t x = 0; x < flow.dists[t].size(); ++x) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.15g\n", t, x, flow.dists[t][x]);
      csv << buf;
      std::cout << buf;
    }
  return kOk;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(cfg, "eval");
  auto env = cfg.env.make();
  const int T = o.T ? *o.T : (cfg.train.val_horizon ? *cfg.train.val_horizon : env->horizon());
  env = env->with_horizon(T);
  const Policy policy(cfg.policy);
  const PolicyParams theta = resolve_theta(o, cfg, policy);
  const double v = exact_value(*env, policy, theta, resolve_mu0(o, cfg));
  const json out{{"value", v}, {"T", T}, {"env", cfg.env.name}};
  std::ofstream(dir / "eval.json") << out.dump(2) << '\n';
  std::cout << out.dump() << '\n';
  return kOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Run config (JSON)");
  sub->add_option("--env", o.env_name, "Bench env with default parameters when no config is given")
      ->check(CLI::IsMember({"two_state", "cyber", "plan"}));
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--threads", o.threads, "Worker threads (1 = bit-exact reproducible, 0 = all)");
  sub->add_option("--eps", o.eps, "Perturbation scale");
  sub->add_option("--N", o.N, "Trajectory pairs per gradient estimate");
  sub->add_option("--n", o.n, "Trajectories per time step for the logit-gradient estimate");
  sub->add_option("--mode", o.mode, "faithful|shared")->check(CLI::IsMember({"faithful", "shared"}));
  sub->add_option("--baseline", o.baseline, "none|mean")->check(CLI::IsMember({"none", "mean"}));
}

void add_theta(CLI::App* sub, Options& o) {
  sub->add_option("--checkpoint", o.checkpoint, "Policy checkpoint (JSON)");
  sub->add_option("--theta", o.theta, "Parameters when no checkpoint is given: zero|init");
  sub->add_option("--mu0", o.mu0, "Initial distribution")->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Mean-field policy-gradient training and estimator checks"};
  app.set_version_flag("--version", software_version());
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a policy with Adam and MF-REINFORCE");
  add_common(train, o);
  train->add_option("--episodes", o.episodes, "Training episodes");
  train->add_flag("--sampled-validation", o.sampled_validation, "Validate with sampled agents");
  train->add_flag("--no-timing", o.no_timing, "Write 0 in wall_time_s (byte-identical CSVs)");

  auto* grad = app.add_subcommand("grad-check", "Compare an estimate with the exact oracle");
  add_common(grad, o);
  add_theta(grad, o);
  grad->add_option("--tolerance", o.tolerance, "Max abs error (default 0.05 (1 + ||fd||))");

  auto* bias = app.add_subcommand("bias-sweep", "Estimator bias against eps");
  add_common(bias, o);
  add_theta(bias, o);
  bias->add_option("--eps-list", o.eps_list, "Perturbation scales")->delimiter(',')->required();
  bias->add_option("--seeds", o.seeds, "Seeds, matched across eps")->delimiter(',');

  auto* mse = app.add_subcommand("mse-sweep", "Estimator variance and MSE against N");
  add_common(mse, o);
  add_theta(mse, o);
  mse->add_option("--N-list", o.N_list, "Trajectory counts")->delimiter(',')->required();
  mse->add_option("--replications", o.replications, "Independent estimates per N");

  auto* flow = app.add_subcommand("flow", "Exact state-distribution flow of a policy");
  add_common(flow, o);
  add_theta(flow, o);
  flow->add_option("--T", o.T, "Horizon");

  auto* eval = app.add_subcommand("eval", "Exact value of a policy");
  add_common(eval, o);
  add_theta(eval, o);
  eval->add_option("--T", o.T, "Horizon (default: validation horizon)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train) return cmd_train(o);
    if (*grad) return cmd_grad_check(o);
    if (*bias) return cmd_bias_sweep(o);
    if (*mse) return cmd_mse_sweep(o);
    if (*flow) return cmd_flow(o);
    if (*eval) return cmd_eval(o);
  } catch (const ConfigError& e) {
    spdlog::error("config error at {}", e.what());
    return kConfig;
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  } catch (const DomainError& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  } catch (const NumericFailure& e) {
    spdlog::error("numeric failure (index {}): {}", e.index(), e.what());
    return kNumeric;
  } catch (const FlowDegeneracy& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const OracleRefusal& e) {
    spdlog::error("oracle refused: {}", e.what());
    return kRefusal;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  }
  return kFail;
}
