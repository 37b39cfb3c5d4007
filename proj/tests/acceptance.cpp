// Acceptance checks, one per criterion id (c01 .. c10). Each prints a single PASS/FAIL line
// with the measured quantities and the threshold; the exit code is non-zero if any failed.
//
//   mfpg_acceptance c01 c05   # selected criteria
//   mfpg_acceptance all

#include "mfpg/bench.hpp"
#include "mfpg/config.hpp"
#include "mfpg/estimators.hpp"
#include "mfpg/flow.hpp"
#include "mfpg/oracle.hpp"
#include "mfpg/sweeps.hpp"
#include "mfpg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <vector>

using namespace mfpg;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string config_path(const std::string& name) {
  return std::string(MFPG_SOURCE_DIR) + "/configs/" + name + ".json";
}

PolicySpec tabular(std::size_t d, std::size_t A) {
  PolicySpec s;
  s.num_states = d;
  s.num_actions = A;
  return s;
}

// Mean over 5 seeds of |pi(ST|x) - pi*(ST|x)| for x = 0, 1 after two-state training at eps.
std::pair<double, double> two_state_errors(double eps) {
  RunConfig cfg = load_run_config(config_path("two-state"));
  cfg.train.eps = eps;
  cfg.train.val_every = 500;
  cfg.train.threads = 0;
  auto env = cfg.env.make();
  const Policy policy(cfg.policy);
  const Eigen::MatrixXd star = two_state_optimal_policy(cfg.env.two_state);
  const StateDist any{0.5, 0.5};
  double e0 = 0.0, e1 = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.train.seed = seed;
    const TrainResult r = train(*env, cfg.policy, cfg.train);
    e0 += std::abs(policy.action_probs(r.theta, 0, 0, any)[kStay] - star(0, kStay)) / 5.0;
    e1 += std::abs(policy.action_probs(r.theta, 0, 1, any)[kStay] - star(1, kStay)) / 5.0;
  }
  return {e0, e1};
}

Outcome c01() {
  const auto [e0, e1] = two_state_errors(0.2);
  return {e0 <= 0.05 && e1 <= 0.05,
          fmt("two-state convergence, 5 seeds, eps=0.2: mean |pi(ST|0)-0.2|=%.4f, "
              "mean |pi(ST|1)-0.25|=%.4f (each <= 0.05)", e0, e1)};
}

Outcome c02() {
  const auto [a0, a1] = two_state_errors(0.2);
  const auto [b0, b1] = two_state_errors(2.0);
  const double small = 0.5 * (a0 + a1), large = 0.5 * (b0 + b1);
  return {small < large, fmt("eps trend, 5 seeds: mean policy error %.4f at eps=0.2 vs %.4f at "
                             "eps=2.0 (need strictly smaller)", small, large)};
}

Outcome c03() {
  RngStream s(3);
  bool ok = true;
  double worst = -1e9;
  std::string where;
  for (double eps : {0.1, 0.5, 1.0}) {
    for (std::size_t d : {2u, 4u, 10u}) {
      for (int k = 0; k < 10; ++k) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 0.01 - std::log1p(-s.uniform());
        const StateDist mu(p / p.sum());
        const LogitVec l = logit(mu);
        std::vector<double> lam(d), out(d);
        double sum = 0.0, sq = 0.0;
        const int draws = 10000;
        for (int j = 0; j < draws; ++j) {
          for (double& v : lam) v = s.normal();
          perturbed_softmax(std::span<const double>(l.values.data(), d), lam, eps, out);
          double tv = 0.0;
          for (std::size_t i = 0; i < d; ++i) tv += 0.5 * std::abs(out[i] - mu[i]);
          sum += tv;
          sq += tv * tv;
        }
        const double mean = sum / draws;
        const double sd = std::sqrt(std::max(0.0, (sq - draws * mean * mean) / (draws - 1)));
        const double bound = eps / 2.0 + 3.0 * sd / 100.0;
        if (mean - bound > worst) {
          worst = mean - bound;
          where = fmt("eps=%.1f d=%zu mean=%.4f bound=%.4f", eps, d, mean, bound);
        }
        ok = ok && mean <= bound;
      }
    }
  }
  return {ok, "perturbation TV bound over 90 cases; tightest: " + where};
}

Outcome c04() {
  auto env = two_state_env({});
  const Policy policy(tabular(2, 2));
  RngStream s(4);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    PolicyParams th{Eigen::VectorXd(4)};
    for (Eigen::Index i = 0; i < 4; ++i) th.values[i] = s.normal();
    const OracleReport r = exact_gradient_decomposition(*env, policy, th, StateDist{0.2, 0.8});
    worst = std::max(worst, r.gap);
  }
  return {worst <= 1e-4,
          fmt("decomposition identity, 20 random theta: max ||RF+MD+MFD-FD||_inf=%.3g (<= 1e-4)",
              worst)};
}

Outcome c05() {
  auto env = two_state_env({});
  const Policy policy(tabular(2, 2));
  const PolicyParams th = policy.zero_params();
  const StateDist mu0{0.2, 0.8};
  const Eigen::VectorXd fd = fd_gradient(*env, policy, th, mu0);
  EstimatorOptions o;
  o.N = 100000;
  o.n = 1000;
  o.threads = 0;
  const std::vector<double> eps{0.1, 0.2, 0.4};
  const std::vector<BiasRow> rows = bias_sweep(*env, policy, th, mu0, fd, eps, {0}, o);
  std::vector<double> bias;
  for (const BiasRow& r : rows) bias.push_back(r.bias_maxnorm);
  const double tol = 0.05 * (1.0 + fd.lpNorm<Eigen::Infinity>());
  const double slope = loglog_slope(eps, bias);
  const bool level = bias[0] <= tol;
  const bool trend = bias[0] < bias[2];
  const bool slope_ok = slope >= 0.5 && slope <= 1.5;
  return {level && trend && slope_ok,
          fmt("estimator consistency at theta=0, mu0=(0.2,0.8): bias(0.1)=%.4f vs tol %.4f [%s]; "
              "bias(0.1)=%.4f < bias(0.4)=%.4f [%s]; slope=%.3f in [0.5,1.5] [%s]",
              bias[0], tol, level ? "ok" : "FAIL", bias[0], bias[2], trend ? "ok" : "FAIL", slope,
              slope_ok ? "ok" : "FAIL")};
}

Outcome c06() {
  auto env = two_state_env({});
  const Policy policy(tabular(2, 2));
  const PolicyParams th = policy.zero_params();
  const StateDist mu0{0.2, 0.8};
  const Flow flow = compute_flow(*env, policy, th, mu0);
  const LogitGradient fd = fd_logit_gradient(*env, policy, th, mu0);
  const LogitGradient est = estimate_logit_gradients(*env, policy, th, flow, 0.1, 200000,
                                                     RngStream(6), 0);
  double worst = 0.0;
  for (std::size_t t = 0; t < est.mats.size(); ++t)
    worst = std::max(worst, (est.mats[t] - fd.mats[t]).cwiseAbs().colwise().sum().maxCoeff());
  const bool zero = est.mats[0].isZero(0.0);
  return {worst <= 0.1 && zero,
          fmt("logit-gradient estimate vs FD (eps=0.1, n=2e5): max_t ||diff||_op=%.4f (<= 0.1); "
              "mats[0] exactly zero: %s", worst, zero ? "yes" : "no")};
}

Outcome c07() {
  auto env = two_state_env({});
  const Policy policy(tabular(2, 2));
  const PolicyParams th = policy.zero_params();
  const StateDist mu0{0.2, 0.8};
  const Flow flow = compute_flow(*env, policy, th, mu0);
  EstimatorOptions o;
  o.eps = 0.2;
  o.n = 10;
  o.threads = 0;
  const std::vector<double> Ns{100, 200, 400, 800};
  const std::size_t reps = 50;
  Eigen::MatrixXd var(4, 4);  // rows N, columns coordinates
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    o.N = std::size_t(Ns[i]);
    Eigen::MatrixXd est(4, Eigen::Index(reps));
    for (std::size_t r = 0; r < reps; ++r)
      est.col(Eigen::Index(r)) =
          estimate_policy_gradient(*env, policy, th, flow, o, RngStream(7).child(r)).grad;
    const Eigen::VectorXd mean = est.rowwise().mean();
    var.row(Eigen::Index(i)) =
        ((est.colwise() - mean).rowwise().squaredNorm() / double(reps - 1)).transpose();
  }
  double worst_ratio = 0.0, min_slope = 1e9, max_slope = -1e9;
  for (Eigen::Index j = 0; j < 4; ++j) {
    worst_ratio = std::max(worst_ratio, var(2, j) / var(1, j));
    std::vector<double> v;
    for (Eigen::Index i = 0; i < 4; ++i) v.push_back(var(i, j));
    const double slope = loglog_slope(Ns, v);
    min_slope = std::min(min_slope, slope);
    max_slope = std::max(max_slope, slope);
  }
  const bool ok = worst_ratio <= 0.7 && min_slope >= -1.3 && max_slope <= -0.7;
  return {ok, fmt("MSE scaling, 50 reps: max_j var(400)/var(200)=%.3f (<= 0.7); "
                  "log-var slopes in [%.3f, %.3f] (need within [-1.3, -0.7])",
                  worst_ratio, min_slope, max_slope)};
}

double tail_mean(const std::vector<MetricsRow>& rows, bool first) {
  const std::size_t k = std::max<std::size_t>(1, rows.size() / 20);
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += rows[first ? i : rows.size() - 1 - i].val_reward;
  return s / double(k);
}

Outcome c08() {
  RunConfig cfg = load_run_config(config_path("cyber"));
  cfg.train.eps = 1.0;
  cfg.train.episodes = 20000;
  cfg.train.threads = 0;
  auto env = cfg.env.make();
  const TrainResult r = train(*env, cfg.policy, cfg.train);
  const double first = tail_mean(r.metrics, true), last = tail_mean(r.metrics, false);

  const Policy policy(cfg.policy);
  auto val_env = env->with_horizon(cfg.env.cyber.T_val);
  const Flow flow = compute_flow(*val_env, policy, r.theta, StateDist::uniform(4));
  double worst_tv = 0.0;
  const std::size_t T = flow.dists.size() - 1;
  for (std::size_t t = T - 10; t < T; ++t)
    worst_tv = std::max(worst_tv, tv_distance(flow.dists[t], flow.dists[t + 1]));
  return {last > first && worst_tv <= 0.05,
          fmt("cyber, 20000 episodes at eps=1: validation reward first-5%% mean %.5f -> last-5%% "
              "mean %.5f (need increase); max TV(mu_t, mu_t+1) over last 10 steps %.4g (<= 0.05)",
              first, last, worst_tv)};
}

Outcome c09() {
  RunConfig cfg = load_run_config(config_path("plan-desk"));
  cfg.train.threads = 0;
  auto env = cfg.env.make();
  const TrainResult r = train(*env, cfg.policy, cfg.train);
  const Policy policy(cfg.policy);
  const Flow flow = compute_flow(*env, policy, r.theta, StateDist::uniform(10));
  const double g0 = plan_target_gap(cfg.env.plan, flow.dists.front().span());
  const double gT = plan_target_gap(cfg.env.plan, flow.dists.back().span());
  return {gT <= 0.1 * g0,
          fmt("distribution planning, %zu episodes, N=%zu, n=%zu, eps=%.1f: "
              "||mu_T - target||^2=%.5f vs 0.1 * ||mu_0 - target||^2=%.5f",
              cfg.train.episodes, cfg.train.N, cfg.train.n, cfg.train.eps, gT, 0.1 * g0)};
}

Outcome c10() {
  const auto start = std::chrono::steady_clock::now();
  const std::string cmd = std::string(MFPG_UNIT_TESTS) + " --no-version=true --minimal=true";
  const int status = std::system(cmd.c_str());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {status == 0 && secs < 60.0,
          fmt("unit invariant suite: exit status %d, %.1f s (< 60 s)", status, secs)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<Outcome()>> checks{
      {"c01", c01}, {"c02", c02}, {"c03", c03}, {"c04", c04}, {"c05", c05},
      {"c06", c06}, {"c07", c07}, {"c08", c08}, {"c09", c09}, {"c10", c10}};
  std::vector<std::string> ids(argv + 1, argv + argc);
  if (ids.empty() || (ids.size() == 1 && ids[0] == "all")) {
    ids.clear();
    for (const auto& [id, fn] : checks) ids.push_back(id);
  }
  int failed = 0;
  for (const std::string& id : ids) {
    const auto it = checks.find(id);
    if (it == checks.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", id.c_str());
      return 2;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s %s %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
