#include "mfpg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mfpg {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Block sizes fix the summation tree. They depend only on n and N, never on the thread count,
// so a run with k threads reproduces the single-threaded result bit for bit.
constexpr std::size_t kTrajBlock = 256;
constexpr std::size_t kMaxPairBlocks = 64;

int resolve_threads(int threads) {
#ifdef _OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

void check_inputs(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                  const Flow& flow, double eps, const char* who) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw InvalidArgument(std::string(who) + ": eps must be positive");
  if (flow.horizon() != env.horizon()) {
    std::ostringstream os;
    os << who << ": flow horizon " << flow.horizon() << " does not match env horizon "
       << env.horizon();
    throw InvalidArgument(os.str());
  }
  if (policy.num_states() != env.num_states() || policy.num_actions() != env.num_actions())
    throw InvalidArgument(std::string(who) + ": policy does not match the environment");
  if (theta.size() != policy.num_params())
    throw InvalidArgument(std::string(who) + ": theta has the wrong length");
  for (const auto& mu : flow.dists)
    if (mu.size() != env.num_states())
      throw InvalidArgument(std::string(who) + ": flow dimension mismatch");
}

void check_interior(const Flow& flow) {
  for (std::size_t t = 0; t < flow.dists.size(); ++t) {
    const StateDist& mu = flow.dists[t];
    if (!mu.interior()) throw FlowDegeneracy(int(t), mu.argmin(), mu[mu.argmin()]);
  }
}

std::span<const double> logit_span(const Flow& flow, std::size_t t) {
  const auto& v = flow.logits[t].values;
  return {v.data(), std::size_t(v.size())};
}

// Sums for one time step of the logit-gradient estimator:
//   ss(i, :)  = sum_k 1{Y_t = i} sum_{s<t} score_s
//   cs[s](i, :) = sum_k 1{Y_t = i} Lambda_s
struct LogitPartial {
  RowMatrix ss;
  std::vector<RowMatrix> cs;

  LogitPartial(std::size_t d, std::size_t D, std::size_t t)
      : ss(RowMatrix::Zero(Eigen::Index(d), Eigen::Index(D))),
        cs(t, RowMatrix::Zero(Eigen::Index(d), Eigen::Index(d))) {}

  void zero() {
    ss.setZero();
    for (auto& c : cs) c.setZero();
  }
  void add(const LogitPartial& o) {
    ss += o.ss;
    for (std::size_t s = 0; s < cs.size(); ++s) cs[s] += o.cs[s];
  }
};

struct TruncatedScratch {
  std::vector<double> lam, mu, probs_row;
  Eigen::VectorXd score;
};

// One perturbed trajectory truncated at t, accumulated into the partial sums.
void accumulate_truncated(const MeanFieldEnv& env, const Policy& policy,
                          const PolicyParams& theta, const Flow& flow, double eps, std::size_t t,
                          RngStream stream, TruncatedScratch& sc, LogitPartial& part) {
  const std::size_t d = env.num_states();
  sc.lam.resize(t * d);
  for (double& v : sc.lam) v = stream.normal();
  sc.mu.resize(d);
  sc.probs_row.resize(d);
  sc.score.setZero();
  std::span<double> score(sc.score.data(), std::size_t(sc.score.size()));

  std::size_t y = categorical_from_uniform(flow.dists[0].span(), stream.uniform());
  for (std::size_t s = 0; s < t; ++s) {
    std::span<const double> lam_s(sc.lam.data() + s * d, d);
    perturbed_softmax(logit_span(flow, s), lam_s, eps, sc.mu);
    const std::size_t a =
        policy.sample_and_score(theta, int(s), y, sc.mu, stream.uniform(), 1.0, score);
    env.transition(y, a, sc.mu, sc.probs_row);
    y = categorical_from_uniform(sc.probs_row, stream.uniform());
  }

  part.ss.row(Eigen::Index(y)) += sc.score.transpose();
  for (std::size_t s = 1; s < t; ++s)
    part.cs[s].row(Eigen::Index(y)) +=
        Eigen::Map<const Eigen::RowVectorXd>(sc.lam.data() + s * d, Eigen::Index(d));
}

// Fills `total` (sized for time step t) with the partial sums over n truncated trajectories.
void logit_sums_into(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                     const Flow& flow, double eps, std::size_t t, std::size_t n,
                     const RngStream& stream, int threads, LogitPartial& total,
                     TruncatedScratch& sc) {
  const std::size_t d = env.num_states();
  const std::size_t D = policy.num_params();
  const std::size_t nb = (n + kTrajBlock - 1) / kTrajBlock;
  const RngStream st = stream.child(t);
  total.zero();

  if (threads <= 1 || nb <= 1) {
    sc.score.resize(Eigen::Index(D));
    // 0 + x is exact, so a single block can accumulate in place.
    if (nb == 1) {
      for (std::size_t k = 0; k < n; ++k)
        accumulate_truncated(env, policy, theta, flow, eps, t, st.child(k), sc, total);
      return;
    }
    LogitPartial part(d, D, t);
    for (std::size_t b = 0; b < nb; ++b) {
      part.zero();
      const std::size_t end = std::min(n, (b + 1) * kTrajBlock);
      for (std::size_t k = b * kTrajBlock; k < end; ++k)
        accumulate_truncated(env, policy, theta, flow, eps, t, st.child(k), sc, part);
      total.add(part);
    }
    return;
  }

  std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel num_threads(threads)
#endif
  {
    LogitPartial part(d, D, t);
    TruncatedScratch local;
    local.score.resize(Eigen::Index(D));
#ifdef _OPENMP
#pragma omp for ordered schedule(static, 1)
#endif
    for (std::size_t b = 0; b < nb; ++b) {
      bool ok = true;
      try {
        part.zero();
        const std::size_t end = std::min(n, (b + 1) * kTrajBlock);
        for (std::size_t k = b * kTrajBlock; k < end; ++k)
          accumulate_truncated(env, policy, theta, flow, eps, t, st.child(k), local, part);
      } catch (...) {
        ok = false;
#ifdef _OPENMP
#pragma omp critical(mfpg_logit_error)
#endif
        if (!error) error = std::current_exception();
      }
#ifdef _OPENMP
#pragma omp ordered
#endif
      if (ok) total.add(part);
    }
  }
  if (error) std::rethrow_exception(error);
}

// Workspace for a faithful per-pair logit-gradient run.
struct LogitWorkspace {
  std::vector<LogitPartial> sums;  // sums[t] for t = 1..T (index 0 unused)
  TruncatedScratch sc;
  Eigen::MatrixXd adj;             // d x (T+1) adjoint vectors
  Eigen::VectorXd scaled, acc;

  LogitWorkspace(std::size_t T, std::size_t d, std::size_t D)
      : adj(Eigen::Index(d), Eigen::Index(T + 1)), scaled(Eigen::Index(d)), acc(Eigen::Index(D)) {
    sums.reserve(T + 1);
    for (std::size_t t = 0; t <= T; ++t) sums.emplace_back(d, D, t);
    sc.score.resize(Eigen::Index(D));
  }
};

// Row t of the output is mats[t]^T lambda_t for the logit gradients of one independent
// logit-gradient run, without forming mats. The forward substitution
//   mats[s] = diag(1/(n mu_s)) (ss_s + eps^-1 sum_{r<s} cs_s[r] mats[r])
// is linear, so the product is pushed backwards through it as d-vectors.
void logit_lambda_products(const MeanFieldEnv& env, const Policy& policy,
                           const PolicyParams& theta, const Flow& flow, double eps,
                           std::size_t n, const RngStream& stream, const PerturbationSeq& lambdas,
                           LogitWorkspace& ws, RowMatrix& out) {
  const std::size_t T = std::size_t(env.horizon());
  const std::size_t d = env.num_states();
  for (std::size_t t = 1; t <= T; ++t)
    logit_sums_into(env, policy, theta, flow, eps, t, n, stream, 1, ws.sums[t], ws.sc);

  out.row(0).setZero();
  for (std::size_t t = 1; t <= T; ++t) {
    ws.adj.leftCols(Eigen::Index(t + 1)).setZero();
    ws.adj.col(Eigen::Index(t)) =
        Eigen::Map<const Eigen::VectorXd>(lambdas.row(t).data(), Eigen::Index(d));
    ws.acc.setZero();
    for (std::size_t s = t; s >= 1; --s) {
      for (std::size_t i = 0; i < d; ++i)
        ws.scaled[Eigen::Index(i)] =
            ws.adj(Eigen::Index(i), Eigen::Index(s)) / (double(n) * flow.dists[s][i]);
      ws.acc.noalias() += ws.sums[s].ss.transpose() * ws.scaled;
      for (std::size_t r = 1; r < s; ++r)
        ws.adj.col(Eigen::Index(r)).noalias() += ws.sums[s].cs[r].transpose() * ws.scaled / eps;
    }
    out.row(Eigen::Index(t)) = ws.acc.transpose();
  }
}

// Per-pair sums for the policy-gradient estimator. Rows are time steps.
struct PairPartial {
  RowMatrix a_lam, a_score, b_lam, b_score;  // sum v G and sum v, split by term
  Eigen::VectorXd g_sum;                     // sum_k G_t
  Eigen::VectorXd c_sum, c_sq;               // per-pair contribution moments
  double y0 = 0, y0_sq = 0, x0 = 0, x0_sq = 0;

  PairPartial(std::size_t T, std::size_t D)
      : a_lam(RowMatrix::Zero(Eigen::Index(T + 1), Eigen::Index(D))),
        a_score(a_lam),
        b_lam(a_lam),
        b_score(a_lam),
        g_sum(Eigen::VectorXd::Zero(Eigen::Index(T + 1))),
        c_sum(Eigen::VectorXd::Zero(Eigen::Index(D))),
        c_sq(c_sum) {}

  void zero() {
    a_lam.setZero();
    a_score.setZero();
    b_lam.setZero();
    b_score.setZero();
    g_sum.setZero();
    c_sum.setZero();
    c_sq.setZero();
    y0 = y0_sq = x0 = x0_sq = 0;
  }
  void add(const PairPartial& o) {
    a_lam += o.a_lam;
    a_score += o.a_score;
    b_lam += o.b_lam;
    b_score += o.b_score;
    g_sum += o.g_sum;
    c_sum += o.c_sum;
    c_sq += o.c_sq;
    y0 += o.y0;
    y0_sq += o.y0_sq;
    x0 += o.x0;
    x0_sq += o.x0_sq;
  }
};

struct PairScratch {
  RowMatrix lam_terms, score_terms;
  Eigen::VectorXd contrib;
  std::vector<double> mu;
  std::unique_ptr<LogitWorkspace> logit;  // faithful mode only
};

void accumulate_pair(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                     const Flow& flow, const EstimatorOptions& opts, const LogitGradient* shared,
                     std::size_t k, const RngStream& pair_stream, PairScratch& sc,
                     PairPartial& part) {
  const std::size_t T = std::size_t(env.horizon());
  const std::size_t d = env.num_states();
  const TrajectoryPair pair = rollout_pair(env, policy, theta, flow, opts.eps, pair_stream.child(0));
  const auto [gx, gy] = returns(pair);

  sc.score_terms.setZero();
  if (shared) {
    sc.lam_terms.row(0).setZero();
    for (std::size_t t = 1; t <= T; ++t)
      sc.lam_terms.row(Eigen::Index(t)).noalias() =
          (shared->mats[t].transpose() * pair.lambdas.lambdas.row(Eigen::Index(t)).transpose())
              .transpose();
  } else {
    logit_lambda_products(env, policy, theta, flow, opts.eps, opts.n, pair_stream.child(1),
                          pair.lambdas, *sc.logit, sc.lam_terms);
  }
  sc.lam_terms /= opts.eps;

  sc.mu.resize(d);
  for (std::size_t t = 0; t < T; ++t) {
    perturbed_softmax(logit_span(flow, t), pair.lambdas.row(t), opts.eps, sc.mu);
    std::span<double> row(sc.score_terms.row(Eigen::Index(t)).data(), policy.num_params());
    policy.add_grad_log_prob(theta, int(t), pair.y_states[t], sc.mu, pair.y_actions[t], 1.0, row);
  }

  sc.contrib.setZero();
  for (std::size_t t = 0; t <= T; ++t) {
    const Eigen::Index ti = Eigen::Index(t);
    sc.contrib += gy[t] * (sc.lam_terms.row(ti) + sc.score_terms.row(ti)).transpose();
  }
  if (!sc.contrib.allFinite()) {
    std::ostringstream os;
    os << "estimate_policy_gradient: non-finite contribution from trajectory " << k;
    throw NumericFailure(os.str(), long(k));
  }

  for (std::size_t t = 0; t <= T; ++t) {
    const Eigen::Index ti = Eigen::Index(t);
    part.a_lam.row(ti) += gy[t] * sc.lam_terms.row(ti);
    part.a_score.row(ti) += gy[t] * sc.score_terms.row(ti);
    part.b_lam.row(ti) += sc.lam_terms.row(ti);
    part.b_score.row(ti) += sc.score_terms.row(ti);
    part.g_sum[ti] += gy[t];
  }
  part.c_sum += sc.contrib;
  part.c_sq += sc.contrib.cwiseAbs2();
  part.y0 += gy[0];
  part.y0_sq += gy[0] * gy[0];
  part.x0 += gx[0];
  part.x0_sq += gx[0] * gx[0];
}

double sample_std(double sum, double sum_sq, std::size_t count) {
  if (count < 2) return 0.0;
  const double m = sum / double(count);
  return std::sqrt(std::max(0.0, (sum_sq - double(count) * m * m) / double(count - 1)));
}

}  // namespace

std::string to_string(EstimatorMode mode) {
  return mode == EstimatorMode::faithful ? "faithful" : "shared";
}

std::string to_string(Baseline baseline) {
  return baseline == Baseline::none ? "none" : "mean";
}

EstimatorMode estimator_mode_from_string(const std::string& s) {
  if (s == "faithful") return EstimatorMode::faithful;
  if (s == "shared") return EstimatorMode::shared;
  throw InvalidArgument("unknown estimator mode '" + s + "' (expected faithful|shared)");
}

Baseline baseline_from_string(const std::string& s) {
  if (s == "none") return Baseline::none;
  if (s == "mean" || s == "mean_return") return Baseline::mean_return;
  throw InvalidArgument("unknown baseline '" + s + "' (expected none|mean)");
}

TrajectoryPair rollout_pair(const MeanFieldEnv& env, const Policy& policy,
                            const PolicyParams& theta, const Flow& flow, double eps,
                            const RngStream& stream) {
  check_inputs(env, policy, theta, flow, eps, "rollout_pair");
  RngStream lam_stream = stream.child(0);
  PerturbationSeq lambdas{
      sample_gaussians(lam_stream, std::size_t(env.horizon()) + 1, env.num_states())};
  return rollout_pair(env, policy, theta, flow, eps, lambdas, stream);
}

TrajectoryPair rollout_pair(const MeanFieldEnv& env, const Policy& policy,
                            const PolicyParams& theta, const Flow& flow, double eps,
                            const PerturbationSeq& lambdas, const RngStream& stream) {
  check_inputs(env, policy, theta, flow, eps, "rollout_pair");
  const std::size_t T = std::size_t(env.horizon());
  const std::size_t d = env.num_states();
  if (std::size_t(lambdas.lambdas.rows()) != T + 1 || std::size_t(lambdas.lambdas.cols()) != d)
    throw InvalidArgument("rollout_pair: perturbations must be (T + 1) x d");

  TrajectoryPair pair;
  pair.lambdas = lambdas;
  pair.eps = eps;
  pair.x_states.reserve(T + 1);
  pair.y_states.reserve(T + 1);
  pair.x_actions.reserve(T);
  pair.y_actions.reserve(T);
  pair.x_rewards.reserve(T);
  pair.y_rewards.reserve(T);
  std::vector<double> row(d);

  RngStream xs = stream.child(1);
  std::size_t x = xs.categorical(flow.dists[0].span());
  pair.x_states.push_back(x);
  for (std::size_t t = 0; t < T; ++t) {
    const auto mu = flow.dists[t].span();
    const std::size_t a = policy.sample_action(theta, int(t), x, mu, xs);
    pair.x_actions.push_back(a);
    pair.x_rewards.push_back(env.reward(int(t), x, a, mu));
    env.transition(x, a, mu, row);
    x = xs.categorical(row);
    pair.x_states.push_back(x);
  }
  pair.x_terminal = env.terminal_reward(x, flow.dists[T].span());

  RngStream ys = stream.child(2);
  std::vector<double> m(d);
  std::size_t y = ys.categorical(flow.dists[0].span());
  pair.y_states.push_back(y);
  for (std::size_t t = 0; t < T; ++t) {
    perturbed_softmax(logit_span(flow, t), lambdas.row(t), eps, m);
    const std::size_t a = policy.sample_action(theta, int(t), y, m, ys);
    pair.y_actions.push_back(a);
    pair.y_rewards.push_back(env.reward(int(t), y, a, m));
    env.transition(y, a, m, row);
    y = ys.categorical(row);
    pair.y_states.push_back(y);
  }
  perturbed_softmax(logit_span(flow, T), lambdas.row(T), eps, m);
  pair.y_terminal = env.terminal_reward(y, m);
  return pair;
}

std::vector<double> reward_to_go(std::span<const double> rewards, double terminal) {
  std::vector<double> g(rewards.size() + 1);
  g.back() = terminal;
  for (std::size_t t = rewards.size(); t-- > 0;) g[t] = rewards[t] + g[t + 1];
  return g;
}

std::pair<std::vector<double>, std::vector<double>> returns(const TrajectoryPair& pair) {
  return {reward_to_go(pair.x_rewards, pair.x_terminal),
          reward_to_go(pair.y_rewards, pair.y_terminal)};
}

LogitGradient estimate_logit_gradients(const MeanFieldEnv& env, const Policy& policy,
                                       const PolicyParams& theta, const Flow& flow, double eps,
                                       std::size_t n, const RngStream& stream, int threads) {
  check_inputs(env, policy, theta, flow, eps, "estimate_logit_gradients");
  if (n < 1) throw InvalidArgument("estimate_logit_gradients: n must be >= 1");
  check_interior(flow);
  threads = resolve_threads(threads);

  const std::size_t T = std::size_t(env.horizon());
  const std::size_t d = env.num_states();
  const std::size_t D = policy.num_params();
  LogitGradient out;
  out.mats.assign(T + 1, Eigen::MatrixXd::Zero(Eigen::Index(d), Eigen::Index(D)));

  TruncatedScratch sc;
  for (std::size_t t = 1; t <= T; ++t) {
    LogitPartial sums(d, D, t);
    logit_sums_into(env, policy, theta, flow, eps, t, n, stream, threads, sums, sc);
    Eigen::MatrixXd m = sums.ss;
    for (std::size_t s = 1; s < t; ++s) m.noalias() += (sums.cs[s] * out.mats[s]) / eps;
    for (std::size_t i = 0; i < d; ++i)
      m.row(Eigen::Index(i)) /= double(n) * flow.dists[t][i];
    if (!m.allFinite())
      throw NumericFailure("estimate_logit_gradients: non-finite estimate", long(t));
    out.mats[t] = std::move(m);
  }
  return out;
}

GradEstimate estimate_policy_gradient(const MeanFieldEnv& env, const Policy& policy,
                                      const PolicyParams& theta, const StateDist& mu0,
                                      const EstimatorOptions& opts, const RngStream& stream) {
  return estimate_policy_gradient(env, policy, theta, compute_flow(env, policy, theta, mu0), opts,
                                  stream);
}

GradEstimate estimate_policy_gradient(const MeanFieldEnv& env, const Policy& policy,
                                      const PolicyParams& theta, const Flow& flow,
                                      const EstimatorOptions& opts, const RngStream& stream) {
  check_inputs(env, policy, theta, flow, opts.eps, "estimate_policy_gradient");
  if (opts.N < 1 || opts.n < 1)
    throw InvalidArgument("estimate_policy_gradient: N and n must be >= 1");
  check_interior(flow);
  const int threads = resolve_threads(opts.threads);

  const std::size_t T = std::size_t(env.horizon());
  const std::size_t D = policy.num_params();
  const std::size_t N = opts.N;
  const bool shared_mode = opts.mode == EstimatorMode::shared;

  LogitGradient shared;
  if (shared_mode)
    shared = estimate_logit_gradients(env, policy, theta, flow, opts.eps, opts.n, stream.child(1),
                                      threads);
  const LogitGradient* shared_ptr = shared_mode ? &shared : nullptr;

  const std::size_t bs = (N + kMaxPairBlocks - 1) / kMaxPairBlocks;
  const std::size_t nb = (N + bs - 1) / bs;
  const RngStream pairs = stream.child(0);

  PairPartial total(T, D);
  auto make_scratch = [&] {
    PairScratch sc;
    sc.lam_terms = RowMatrix::Zero(Eigen::Index(T + 1), Eigen::Index(D));
    sc.score_terms = sc.lam_terms;
    sc.contrib = Eigen::VectorXd::Zero(Eigen::Index(D));
    if (!shared_mode) sc.logit = std::make_unique<LogitWorkspace>(T, env.num_states(), D);
    return sc;
  };
  auto run_block = [&](std::size_t b, PairScratch& sc, PairPartial& part) {
    part.zero();
    const std::size_t end = std::min(N, (b + 1) * bs);
    for (std::size_t k = b * bs; k < end; ++k)
      accumulate_pair(env, policy, theta, flow, opts, shared_ptr, k, pairs.child(k), sc, part);
  };

  if (threads <= 1 || nb <= 1) {
    PairPartial part(T, D);
    PairScratch sc = make_scratch();
    for (std::size_t b = 0; b < nb; ++b) {
      run_block(b, sc, part);
      total.add(part);
    }
  } else {
    std::exception_ptr error;
    long error_block = -1;
#ifdef _OPENMP
#pragma omp parallel num_threads(threads)
#endif
    {
      PairPartial part(T, D);
      PairScratch sc = make_scratch();
#ifdef _OPENMP
#pragma omp for ordered schedule(static, 1)
#endif
      for (std::size_t b = 0; b < nb; ++b) {
        bool ok = true;
        try {
          run_block(b, sc, part);
        } catch (...) {
          ok = false;
#ifdef _OPENMP
#pragma omp critical(mfpg_pair_error)
#endif
          // Keep the earliest failing block so the reported index matches a serial run.
          if (error_block < 0 || long(b) < error_block) {
            error = std::current_exception();
            error_block = long(b);
          }
        }
#ifdef _OPENMP
#pragma omp ordered
#endif
        if (ok) total.add(part);
      }
    }
    if (error) std::rethrow_exception(error);
  }

  const double inv_n = 1.0 / double(N);
  Eigen::VectorXd baseline = Eigen::VectorXd::Zero(Eigen::Index(T + 1));
  if (opts.baseline == Baseline::mean_return) baseline = total.g_sum * inv_n;

  Eigen::VectorXd lam_part = Eigen::VectorXd::Zero(Eigen::Index(D));
  Eigen::VectorXd score_part = Eigen::VectorXd::Zero(Eigen::Index(D));
  for (std::size_t t = 0; t <= T; ++t) {
    const Eigen::Index ti = Eigen::Index(t);
    lam_part += (total.a_lam.row(ti) - baseline[ti] * total.b_lam.row(ti)).transpose();
    score_part += (total.a_score.row(ti) - baseline[ti] * total.b_score.row(ti)).transpose();
  }
  lam_part *= inv_n;
  score_part *= inv_n;

  GradEstimate est;
  est.grad = lam_part + score_part;
  if (!est.grad.allFinite()) throw NumericFailure("estimate_policy_gradient: non-finite gradient");
  est.n_traj = N;
  est.eps = opts.eps;
  auto& diag = est.diagnostics;
  diag.lambda_term_norm = lam_part.lpNorm<Eigen::Infinity>();
  diag.score_term_norm = score_part.lpNorm<Eigen::Infinity>();
  diag.y_return_mean = total.y0 * inv_n;
  diag.y_return_std = sample_std(total.y0, total.y0_sq, N);
  diag.x_return_mean = total.x0 * inv_n;
  diag.x_return_std = sample_std(total.x0, total.x0_sq, N);
  diag.contribution_std.resize(Eigen::Index(D));
  for (Eigen::Index j = 0; j < Eigen::Index(D); ++j)
    diag.contribution_std[j] = sample_std(total.c_sum[j], total.c_sq[j], N);
  diag.shared_logit_gradients = shared_mode;
  return est;
}

}  // namespace mfpg
