#include "mfpg/oracle.hpp"

#include <cmath>
#include <sstream>

namespace mfpg {

namespace {

void check_step(double h, const char* who) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument(std::string(who) + ": h must be positive");
}

PolicyParams shifted(const PolicyParams& theta, std::size_t j, double delta) {
  PolicyParams p = theta;
  p.values[Eigen::Index(j)] += delta;
  return p;
}

// Gradient in l of f(softmax(l)) at l, by central differences with step h.
template <class F>
Eigen::RowVectorXd logit_derivative(const LogitVec& l, double h, F&& f) {
  const Eigen::Index d = Eigen::Index(l.size());
  Eigen::RowVectorXd g(d);
  LogitVec lp = l, lm = l;
  for (Eigen::Index i = 0; i < d; ++i) {
    lp.values[i] += h;
    lm.values[i] -= h;
    g[i] = (f(softmax(lp).span()) - f(softmax(lm).span())) / (2.0 * h);
    lp.values[i] = l.values[i];
    lm.values[i] = l.values[i];
  }
  return g;
}

struct Enumerator {
  const MeanFieldEnv& env;
  const Policy& policy;
  const PolicyParams& theta;
  const Flow& flow;
  std::size_t d, nA, T;
  // Per (t, x, a): action probability, score, and the logit-chain vectors.
  std::vector<Eigen::MatrixXd> probs;                // t -> d x A
  std::vector<std::vector<Eigen::VectorXd>> score;   // t -> x*A + a
  std::vector<std::vector<Eigen::VectorXd>> md_r;    // grad_l r~ . grad_theta l_t
  std::vector<std::vector<Eigen::VectorXd>> mfd_p;   // grad_l log p~ . grad_theta l_t
  std::vector<std::vector<Eigen::MatrixXd>> kernel;  // t -> a -> d x d
  std::vector<std::vector<Eigen::VectorXd>> mfd_k;   // t -> (x*A + a)*d + x'
  std::vector<std::vector<double>> reward;           // t -> x*A + a
  std::vector<Eigen::VectorXd> md_g;                 // x
  std::vector<double> terminal;                      // x

  Eigen::VectorXd rf, md, mfd;

  void walk(std::size_t t, std::size_t x, double prob, double ret, const Eigen::VectorXd& sc,
            const Eigen::VectorXd& mdv, const Eigen::VectorXd& mfv) {
    if (t == T) {
      const double G = ret + terminal[x];
      rf += prob * G * sc;
      md += prob * (mdv + md_g[x]);
      mfd += prob * G * mfv;
      return;
    }
    for (std::size_t a = 0; a < nA; ++a) {
      const double pa = probs[t](Eigen::Index(x), Eigen::Index(a));
      if (pa <= 0.0) continue;
      const std::size_t xa = x * nA + a;
      const Eigen::VectorXd sc2 = sc + score[t][xa];
      const Eigen::VectorXd md2 = mdv + md_r[t][xa];
      for (std::size_t y = 0; y < d; ++y) {
        const double py = kernel[t][a](Eigen::Index(x), Eigen::Index(y));
        if (py <= 0.0) continue;
        walk(t + 1, y, prob * pa * py, ret + reward[t][xa], sc2, md2,
             mfv + mfd_p[t][xa] + mfd_k[t][xa * d + y]);
      }
    }
  }
};

}  // namespace

double exact_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                   const Flow& flow) {
  const int T = env.horizon();
  if (flow.horizon() != T) throw InvalidArgument("exact_value: flow horizon mismatch");
  const std::size_t d = env.num_states();
  Eigen::MatrixXd table;
  double v = 0.0;
  for (int t = 0; t < T; ++t) {
    const StateDist& mu = flow.dists[std::size_t(t)];
    policy.action_table(theta, t, mu.span(), table);
    for (std::size_t x = 0; x < d; ++x) {
      double r = 0.0;
      for (std::size_t a = 0; a < env.num_actions(); ++a)
        r += table(Eigen::Index(x), Eigen::Index(a)) * env.reward(t, x, a, mu.span());
      v += mu[x] * r;
    }
  }
  const StateDist& muT = flow.dists[std::size_t(T)];
  for (std::size_t x = 0; x < d; ++x) v += muT[x] * env.terminal_reward(x, muT.span());
  return v;
}

double exact_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                   const StateDist& mu0) {
  return exact_value(env, policy, theta, compute_flow(env, policy, theta, mu0));
}

Eigen::VectorXd fd_gradient(const MeanFieldEnv& env, const Policy& policy,
                            const PolicyParams& theta, const StateDist& mu0, double h) {
  check_step(h, "fd_gradient");
  Eigen::VectorXd g(Eigen::Index(theta.size()));
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double up = exact_value(env, policy, shifted(theta, j, h), mu0);
    const double down = exact_value(env, policy, shifted(theta, j, -h), mu0);
    g[Eigen::Index(j)] = (up - down) / (2.0 * h);
  }
  return g;
}

LogitGradient fd_logit_gradient(const MeanFieldEnv& env, const Policy& policy,
                                const PolicyParams& theta, const StateDist& mu0, double h) {
  check_step(h, "fd_logit_gradient");
  const std::size_t T = std::size_t(env.horizon());
  const Eigen::Index d = Eigen::Index(env.num_states());
  LogitGradient out;
  out.mats.assign(T + 1, Eigen::MatrixXd::Zero(d, Eigen::Index(theta.size())));
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const Flow up = compute_flow(env, policy, shifted(theta, j, h), mu0);
    const Flow down = compute_flow(env, policy, shifted(theta, j, -h), mu0);
    for (std::size_t t = 1; t <= T; ++t)
      out.mats[t].col(Eigen::Index(j)) = (up.logits[t].values - down.logits[t].values) / (2.0 * h);
  }
  return out;
}

OracleReport exact_gradient_decomposition(const MeanFieldEnv& env, const Policy& policy,
                                          const PolicyParams& theta, const StateDist& mu0,
                                          double h, double cap) {
  check_step(h, "exact_gradient_decomposition");
  const std::size_t d = env.num_states();
  const std::size_t nA = env.num_actions();
  const std::size_t T = std::size_t(env.horizon());
  const double size = std::pow(double(d * nA), double(T));
  if (size > cap) {
    std::ostringstream os;
    os << "exact_gradient_decomposition: enumeration size (|X||A|)^T = (" << d << "*" << nA
       << ")^" << T << " = " << size << " exceeds the cap " << cap;
    throw OracleRefusal(os.str());
  }

  const Flow flow = compute_flow(env, policy, theta, mu0);
  const LogitGradient jac = fd_logit_gradient(env, policy, theta, mu0, h);
  const Eigen::Index D = Eigen::Index(theta.size());

  Enumerator e{env, policy, theta, flow, d, nA, T, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  e.probs.resize(T);
  e.score.resize(T);
  e.md_r.resize(T);
  e.mfd_p.resize(T);
  e.kernel.resize(T);
  e.mfd_k.resize(T);
  e.reward.resize(T);
  std::vector<double> pbuf(nA), row(d);
  for (std::size_t t = 0; t < T; ++t) {
    const int ti = int(t);
    const StateDist& mu = flow.dists[t];
    const LogitVec& l = flow.logits[t];
    policy.action_table(theta, ti, mu.span(), e.probs[t]);
    e.kernel[t].resize(nA);
    for (std::size_t a = 0; a < nA; ++a) env.transition_matrix(a, mu.span(), e.kernel[t][a]);
    e.mfd_k[t].assign(d * nA * d, Eigen::VectorXd::Zero(D));
    for (std::size_t x = 0; x < d; ++x) {
      for (std::size_t a = 0; a < nA; ++a) {
        e.score[t].push_back(policy.grad_log_prob(theta, ti, x, mu.span(), a));
        e.reward[t].push_back(env.reward(ti, x, a, mu.span()));
        const Eigen::RowVectorXd dr = logit_derivative(l, h, [&](std::span<const double> m) {
          return env.reward(ti, x, a, m);
        });
        e.md_r[t].push_back((dr * jac.mats[t]).transpose());
        const Eigen::RowVectorXd dp = logit_derivative(l, h, [&](std::span<const double> m) {
          policy.action_probs(theta, ti, x, m, pbuf);
          return std::log(pbuf[a]);
        });
        e.mfd_p[t].push_back((dp * jac.mats[t]).transpose());
        for (std::size_t y = 0; y < d; ++y) {
          if (e.kernel[t][a](Eigen::Index(x), Eigen::Index(y)) <= 0.0) continue;
          const Eigen::RowVectorXd dk = logit_derivative(l, h, [&](std::span<const double> m) {
            env.transition(x, a, m, row);
            return std::log(row[y]);
          });
          e.mfd_k[t][(x * nA + a) * d + y] = (dk * jac.mats[t]).transpose();
        }
      }
    }
  }
  const LogitVec& lT = flow.logits[T];
  for (std::size_t x = 0; x < d; ++x) {
    e.terminal.push_back(env.terminal_reward(x, flow.dists[T].span()));
    const Eigen::RowVectorXd dg = logit_derivative(
        lT, h, [&](std::span<const double> m) { return env.terminal_reward(x, m); });
    e.md_g.push_back((dg * jac.mats[T]).transpose());
  }

  e.rf = e.md = e.mfd = Eigen::VectorXd::Zero(D);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(D);
  for (std::size_t x = 0; x < d; ++x) e.walk(0, x, mu0[x], 0.0, zero, zero, zero);

  OracleReport rep;
  rep.value = exact_value(env, policy, theta, flow);
  rep.grad_fd = fd_gradient(env, policy, theta, mu0, h);
  rep.decomposition = Decomposition{e.rf, e.md, e.mfd};
  rep.fd_step = h;
  rep.gap = (rep.decomposition->sum() - rep.grad_fd).lpNorm<Eigen::Infinity>();
  rep.tolerance = std::max(1e-4, 10.0 * h * h * (1.0 + rep.grad_fd.lpNorm<Eigen::Infinity>()));
  return rep;
}

double sampled_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                     const StateDist& mu0, std::size_t agents, const RngStream& stream) {
  if (agents < 1) throw InvalidArgument("sampled_value: need at least one agent");
  const Flow flow = compute_flow(env, policy, theta, mu0);
  const int T = env.horizon();
  std::vector<double> row(env.num_states());
  double total = 0.0;
  for (std::size_t k = 0; k < agents; ++k) {
    RngStream s = stream.child(k);
    std::size_t x = s.categorical(mu0.span());
    double ret = 0.0;
    for (int t = 0; t < T; ++t) {
      const auto mu = flow.dists[std::size_t(t)].span();
      const std::size_t a = policy.sample_action(theta, t, x, mu, s);
      ret += env.reward(t, x, a, mu);
      env.transition(x, a, mu, row);
      x = s.categorical(row);
    }
    ret += env.terminal_reward(x, flow.dists[std::size_t(T)].span());
    total += ret;
  }
  return total / double(agents);
}

double inverse_mass_bound(const Flow& flow) {
  double best = 0.0;
  for (const StateDist& mu : flow.dists) best = std::max(best, mu.probs().cwiseInverse().sum());
  return best;
}

}  // namespace mfpg
