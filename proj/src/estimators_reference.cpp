// Serial reference for the estimators: one trajectory at a time, straight from the defining
// sums, no blocking and no aggregation tricks. Draw order matches the kernel in estimators.cpp.

#include "mfpg/estimators.hpp"

#include <cmath>
#include <sstream>

namespace mfpg::reference {

namespace {

StateDist perturbed(const Flow& flow, std::size_t t, const Eigen::VectorXd& lambda, double eps) {
  return softmax(LogitVec{flow.logits[t].values + eps * lambda});
}

double stdev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

}  // namespace

LogitGradient estimate_logit_gradients(const MeanFieldEnv& env, const Policy& policy,
                                       const PolicyParams& theta, const Flow& flow, double eps,
                                       std::size_t n, const RngStream& stream) {
  if (!(eps > 0.0)) throw InvalidArgument("reference::estimate_logit_gradients: eps must be positive");
  if (n < 1) throw InvalidArgument("reference::estimate_logit_gradients: n must be >= 1");
  if (flow.horizon() != env.horizon())
    throw InvalidArgument("reference::estimate_logit_gradients: flow horizon mismatch");
  for (std::size_t t = 0; t < flow.dists.size(); ++t)
    if (!flow.dists[t].interior())
      throw FlowDegeneracy(int(t), flow.dists[t].argmin(), flow.dists[t][flow.dists[t].argmin()]);

  const std::size_t T = std::size_t(env.horizon());
  const Eigen::Index d = Eigen::Index(env.num_states());
  const Eigen::Index D = Eigen::Index(policy.num_params());
  LogitGradient out;
  out.mats.assign(T + 1, Eigen::MatrixXd::Zero(d, D));

  std::vector<double> probs(env.num_actions()), row(env.num_states());
  for (std::size_t t = 1; t <= T; ++t) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, D);
    for (std::size_t k = 0; k < n; ++k) {
      RngStream s = stream.child(t).child(k);
      std::vector<Eigen::VectorXd> lam(t, Eigen::VectorXd(d));
      for (std::size_t u = 0; u < t; ++u)
        for (Eigen::Index i = 0; i < d; ++i) lam[u][i] = s.normal();

      Eigen::VectorXd acc = Eigen::VectorXd::Zero(D);
      std::size_t y = categorical_from_uniform(flow.dists[0].span(), s.uniform());
      for (std::size_t u = 0; u < t; ++u) {
        const StateDist mu = perturbed(flow, u, lam[u], eps);
        policy.action_probs(theta, int(u), y, mu.span(), probs);
        const std::size_t a = categorical_from_uniform(probs, s.uniform());
        acc += out.mats[u].transpose() * lam[u] / eps;
        acc += policy.grad_log_prob(theta, int(u), y, mu.span(), a);
        env.transition(y, a, mu.span(), row);
        y = categorical_from_uniform(row, s.uniform());
      }
      m.row(Eigen::Index(y)) += acc.transpose();
    }
    for (Eigen::Index i = 0; i < d; ++i) m.row(i) /= double(n) * flow.dists[t][std::size_t(i)];
    out.mats[t] = m;
  }
  return out;
}

GradEstimate estimate_policy_gradient(const MeanFieldEnv& env, const Policy& policy,
                                      const PolicyParams& theta, const Flow& flow,
                                      const EstimatorOptions& opts, const RngStream& stream) {
  if (opts.N < 1 || opts.n < 1)
    throw InvalidArgument("reference::estimate_policy_gradient: N and n must be >= 1");
  const std::size_t T = std::size_t(env.horizon());
  const Eigen::Index D = Eigen::Index(policy.num_params());
  const double eps = opts.eps;

  LogitGradient shared;
  if (opts.mode == EstimatorMode::shared)
    shared = reference::estimate_logit_gradients(env, policy, theta, flow, eps, opts.n, stream.child(1));

  // v[k][t] = eps^-1 Lambda_t . mats[t] + 1{t < T} score_t, kept split for the diagnostics.
  std::vector<std::vector<Eigen::VectorXd>> lam_terms(opts.N), score_terms(opts.N);
  std::vector<std::vector<double>> g(opts.N);
  std::vector<double> y0(opts.N), x0(opts.N);
  for (std::size_t k = 0; k < opts.N; ++k) {
    const RngStream ps = stream.child(0).child(k);
    const TrajectoryPair pair = rollout_pair(env, policy, theta, flow, eps, ps.child(0));
    const auto [gx, gy] = returns(pair);
    const LogitGradient lg = opts.mode == EstimatorMode::shared
                                 ? shared
                                 : reference::estimate_logit_gradients(env, policy, theta, flow, eps, opts.n,
                                                            ps.child(1));
    for (std::size_t t = 0; t <= T; ++t) {
      const Eigen::VectorXd lam = pair.lambdas.lambdas.row(Eigen::Index(t)).transpose();
      lam_terms[k].push_back(lg.mats[t].transpose() * lam / eps);
      Eigen::VectorXd sc = Eigen::VectorXd::Zero(D);
      if (t < T) {
        const StateDist mu = perturbed(flow, t, lam, eps);
        sc = policy.grad_log_prob(theta, int(t), pair.y_states[t], mu.span(), pair.y_actions[t]);
      }
      score_terms[k].push_back(sc);
    }
    g[k] = gy;
    y0[k] = gy[0];
    x0[k] = gx[0];
  }

  std::vector<double> b(T + 1, 0.0);
  if (opts.baseline == Baseline::mean_return)
    for (std::size_t t = 0; t <= T; ++t) {
      for (std::size_t k = 0; k < opts.N; ++k) b[t] += g[k][t];
      b[t] /= double(opts.N);
    }

  Eigen::VectorXd lam_part = Eigen::VectorXd::Zero(D), score_part = Eigen::VectorXd::Zero(D);
  std::vector<Eigen::VectorXd> contrib(opts.N, Eigen::VectorXd::Zero(D));
  for (std::size_t k = 0; k < opts.N; ++k) {
    for (std::size_t t = 0; t <= T; ++t) {
      lam_part += lam_terms[k][t] * (g[k][t] - b[t]);
      score_part += score_terms[k][t] * (g[k][t] - b[t]);
      contrib[k] += (lam_terms[k][t] + score_terms[k][t]) * g[k][t];
    }
    if (!contrib[k].allFinite()) {
      std::ostringstream os;
      os << "reference::estimate_policy_gradient: non-finite contribution from trajectory " << k;
      throw NumericFailure(os.str(), long(k));
    }
  }
  lam_part /= double(opts.N);
  score_part /= double(opts.N);

  GradEstimate est;
  est.grad = lam_part + score_part;
  est.n_traj = opts.N;
  est.eps = eps;
  auto& diag = est.diagnostics;
  diag.lambda_term_norm = lam_part.lpNorm<Eigen::Infinity>();
  diag.score_term_norm = score_part.lpNorm<Eigen::Infinity>();
  double ym = 0, xm = 0;
  for (std::size_t k = 0; k < opts.N; ++k) {
    ym += y0[k];
    xm += x0[k];
  }
  diag.y_return_mean = ym / double(opts.N);
  diag.x_return_mean = xm / double(opts.N);
  diag.y_return_std = stdev(y0);
  diag.x_return_std = stdev(x0);
  diag.contribution_std.resize(D);
  for (Eigen::Index j = 0; j < D; ++j) {
    std::vector<double> col(opts.N);
    for (std::size_t k = 0; k < opts.N; ++k) col[k] = contrib[k][j];
    diag.contribution_std[j] = stdev(col);
  }
  diag.shared_logit_gradients = opts.mode == EstimatorMode::shared;
  return est;
}

}  // namespace mfpg::reference
