#include "doctest.h"
#include "fixtures.hpp"

#include "mfpg/bench.hpp"
#include "mfpg/estimators.hpp"
#include "mfpg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

using namespace mfpg;

namespace {

double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return ((a - b).array().abs() / (1.0 + b.array().abs())).maxCoeff();
}

// V_eps on the two-state env with a tabular policy. Neither the policy nor the kernel reads
// mu, so Y_t has law mu_t and only the rewards see the perturbation:
//   V_eps = sum_t mu_t(1) - E[m^2] - lam E|m - (1 - p)|,  m = sigmoid(c_t + eps sqrt(2) Z),
// with c_t = l_t(1) - l_t(0). The Gaussian integral is split at the kink and done by Simpson.
double two_state_perturbed_value(const TwoStateParams& p, const Eigen::VectorXd& theta,
                                 double mu0_1, double eps) {
  auto mv = [&](int x) {
    const double a = theta[2 * x], b = theta[2 * x + 1];
    return 1.0 / (1.0 + std::exp(a - b));
  };
  const double target = 1.0 - p.p;
  const double s = eps * std::sqrt(2.0);
  auto f = [&](double c, double z) {
    const double m = 1.0 / (1.0 + std::exp(-(c + s * z)));
    return (m * m + p.lam * std::abs(m - target)) * std::exp(-0.5 * z * z) /
           std::sqrt(2.0 * std::numbers::pi);
  };
  auto simpson = [&](double c, double lo, double hi) {
    const int n = 2000;
    const double h = (hi - lo) / n;
    double acc = f(c, lo) + f(c, hi);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(c, lo + i * h);
    return acc * h / 3.0;
  };
  double m1 = mu0_1, v = 0.0;
  for (int t = 0; t <= p.T; ++t) {
    const double c = std::log(m1) - std::log(1.0 - m1);
    const double kink = std::clamp((std::log(target / (1.0 - target)) - c) / s, -12.0, 12.0);
    v += m1 - simpson(c, -12.0, kink) - simpson(c, kink, 12.0);
    m1 = m1 * (1.0 - mv(1) * p.lambda1) + (1.0 - m1) * mv(0) * p.lambda0;
  }
  return v;
}

Eigen::VectorXd two_state_perturbed_grad(const TwoStateParams& p, const Eigen::VectorXd& theta,
                                         double mu0_1, double eps) {
  Eigen::VectorXd g(theta.size());
  const double h = 1e-5;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    Eigen::VectorXd up = theta, dn = theta;
    up[j] += h;
    dn[j] -= h;
    g[j] = (two_state_perturbed_value(p, up, mu0_1, eps) -
            two_state_perturbed_value(p, dn, mu0_1, eps)) /
           (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("reward-to-go recursion") {
  const std::vector<double> r{1.0, 2.0, 3.0};
  CHECK(reward_to_go(r, 4.0) == std::vector<double>{10.0, 9.0, 7.0, 4.0});
  CHECK(reward_to_go({}, 2.5) == std::vector<double>{2.5});
}

TEST_CASE("rollout pairs record rewards at the right measures") {
  auto env = cyber_env({});
  const Policy pol(testing::mlp_spec(4, 2, env->horizon(), 5));
  const PolicyParams th = testing::random_params(pol.num_params(), RngStream(3));
  const Flow flow = compute_flow(*env, pol, th, StateDist{0.1, 0.2, 0.3, 0.4});
  const double eps = 0.7;
  const TrajectoryPair pair = rollout_pair(*env, pol, th, flow, eps, RngStream(9));
  const std::size_t T = std::size_t(env->horizon());
  REQUIRE(pair.x_states.size() == T + 1);
  REQUIRE(pair.y_actions.size() == T);
  REQUIRE(pair.lambdas.horizon() == T);
  CHECK(pair.eps == eps);

  std::vector<double> m(4);
  for (std::size_t t = 0; t < T; ++t) {
    CHECK(pair.x_rewards[t] ==
          env->reward(int(t), pair.x_states[t], pair.x_actions[t], flow.dists[t].span()));
    perturbed_softmax(std::span<const double>(flow.logits[t].values.data(), 4), pair.lambdas.row(t),
                      eps, m);
    CHECK(pair.y_rewards[t] == doctest::Approx(env->reward(int(t), pair.y_states[t],
                                                           pair.y_actions[t], m)));
  }
  const auto [gx, gy] = returns(pair);
  CHECK(gx == reward_to_go(pair.x_rewards, pair.x_terminal));
  CHECK(gy == reward_to_go(pair.y_rewards, pair.y_terminal));

  // Draws are fixed by the stream.
  const TrajectoryPair again = rollout_pair(*env, pol, th, flow, eps, RngStream(9));
  CHECK(again.y_states == pair.y_states);
  CHECK(again.lambdas.lambdas == pair.lambdas.lambdas);
}

TEST_CASE("with zero perturbation X and Y have the same law") {
  auto env = cyber_env({});
  const Policy pol(testing::tabular_spec(4, 2));
  const PolicyParams th = testing::random_params(pol.num_params(), RngStream(5));
  const Flow flow = compute_flow(*env, pol, th, StateDist::uniform(4));
  const std::size_t T = std::size_t(env->horizon());
  PerturbationSeq zero{PerturbationSeq::Matrix::Zero(Eigen::Index(T + 1), 4)};
  Eigen::MatrixXd cx = Eigen::MatrixXd::Zero(Eigen::Index(T + 1), 4), cy = cx;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const TrajectoryPair pr = rollout_pair(*env, pol, th, flow, 0.5, zero, RngStream(1).child(k));
    for (std::size_t t = 0; t <= T; ++t) {
      cx(Eigen::Index(t), Eigen::Index(pr.x_states[t])) += 1.0;
      cy(Eigen::Index(t), Eigen::Index(pr.y_states[t])) += 1.0;
    }
  }
  for (Eigen::Index t = 0; t <= Eigen::Index(T); ++t) {
    CHECK(0.5 * (cx.row(t) - cy.row(t)).cwiseAbs().sum() / n <= 0.02);
    // Both match the flow.
    const Eigen::RowVectorXd mu = flow.dists[std::size_t(t)].probs().transpose();
    CHECK(0.5 * (cx.row(t) / n - mu).cwiseAbs().sum() <= 0.02);
  }
}

TEST_CASE("fixed seeds give identical estimates for any thread count") {
  auto env = cyber_env({});
  const Policy pol(testing::mlp_spec(4, 2, env->horizon(), 4));
  const PolicyParams th = testing::random_params(pol.num_params(), RngStream(8), 0.5);
  const Flow flow = compute_flow(*env, pol, th, StateDist{0.25, 0.25, 0.25, 0.25});

  const LogitGradient l1 = estimate_logit_gradients(*env, pol, th, flow, 0.3, 600, RngStream(2), 1);
  const LogitGradient l4 = estimate_logit_gradients(*env, pol, th, flow, 0.3, 600, RngStream(2), 4);
  CHECK(l1.mats[0].isZero(0.0));
  for (std::size_t t = 0; t < l1.mats.size(); ++t) CHECK(l1.mats[t] == l4.mats[t]);

  for (EstimatorMode mode : {EstimatorMode::faithful, EstimatorMode::shared}) {
    EstimatorOptions o;
    o.eps = 0.4;
    o.N = 300;
    o.n = 4;
    o.mode = mode;
    o.baseline = Baseline::mean_return;
    const GradEstimate a = estimate_policy_gradient(*env, pol, th, flow, o, RngStream(6));
    o.threads = 4;
    const GradEstimate b = estimate_policy_gradient(*env, pol, th, flow, o, RngStream(6));
    CHECK(a.grad == b.grad);
    CHECK(a.diagnostics.contribution_std == b.diagnostics.contribution_std);
    CHECK(b.diagnostics.shared_logit_gradients == (mode == EstimatorMode::shared));
    const GradEstimate c = estimate_policy_gradient(*env, pol, th, flow, o, RngStream(7));
    CHECK(c.grad != a.grad);
  }
}

TEST_CASE("blocked kernels agree with the serial reference") {
  auto env = cyber_env({});
  const Policy pol(testing::mlp_spec(4, 2, env->horizon(), 4));
  const PolicyParams th = testing::random_params(pol.num_params(), RngStream(10), 0.5);
  const Flow flow = compute_flow(*env, pol, th, StateDist{0.4, 0.3, 0.2, 0.1});

  const LogitGradient k = estimate_logit_gradients(*env, pol, th, flow, 0.3, 700, RngStream(4), 2);
  const LogitGradient r = reference::estimate_logit_gradients(*env, pol, th, flow, 0.3, 700,
                                                              RngStream(4));
  for (std::size_t t = 0; t < k.mats.size(); ++t) CHECK(max_rel_diff(k.mats[t], r.mats[t]) <= 1e-9);

  for (EstimatorMode mode : {EstimatorMode::faithful, EstimatorMode::shared})
    for (Baseline bl : {Baseline::none, Baseline::mean_return}) {
      EstimatorOptions o;
      o.eps = 0.5;
      o.N = 150;
      o.n = 6;
      o.mode = mode;
      o.baseline = bl;
      o.threads = 3;
      const GradEstimate a = estimate_policy_gradient(*env, pol, th, flow, o, RngStream(1));
      const GradEstimate b = reference::estimate_policy_gradient(*env, pol, th, flow, o, RngStream(1));
      CHECK(max_rel_diff(a.grad, b.grad) <= 1e-9);
      CHECK(max_rel_diff(a.diagnostics.contribution_std, b.diagnostics.contribution_std) <= 1e-9);
      CHECK(a.diagnostics.y_return_mean == doctest::Approx(b.diagnostics.y_return_mean));
    }
}

TEST_CASE("constant rewards give a zero gradient") {
  auto env = testing::constant_reward_env(1.5, 3);
  const Policy pol(testing::tabular_spec(3, 2));
  const PolicyParams th = testing::random_params(6, RngStream(3));
  const Flow flow = compute_flow(*env, pol, th, StateDist{0.3, 0.3, 0.4});
  EstimatorOptions o;
  o.eps = 0.3;
  o.N = 4000;
  o.n = 10;
  const GradEstimate g = estimate_policy_gradient(*env, pol, th, flow, o, RngStream(2));
  const Eigen::ArrayXd bound = 4.0 * g.diagnostics.contribution_std.array() / std::sqrt(double(o.N));
  CHECK((g.grad.array().abs() <= bound + 1e-12).all());

  // The mean-return baseline removes a constant return exactly.
  o.baseline = Baseline::mean_return;
  const GradEstimate b = estimate_policy_gradient(*env, pol, th, flow, o, RngStream(2));
  CHECK(b.grad.lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("on a mu-independent env the estimate is unbiased for the exact gradient") {
  auto env = testing::mu_free_env(3, 2, 3);
  const Policy pol(testing::tabular_spec(3, 2));
  const PolicyParams th = testing::random_params(6, RngStream(12), 0.5);
  const StateDist mu0{0.5, 0.3, 0.2};
  const Eigen::VectorXd fd = fd_gradient(*env, pol, th, mu0);
  EstimatorOptions o;
  o.eps = 0.5;
  o.N = 20000;
  o.n = 10;
  o.threads = 0;
  const GradEstimate g = estimate_policy_gradient(*env, pol, th, mu0, o, RngStream(4));
  const Eigen::ArrayXd bound = 4.0 * g.diagnostics.contribution_std.array() / std::sqrt(double(o.N));
  CHECK(((g.grad - fd).array().abs() <= bound).all());
  // Rewards ignore mu, so the perturbation term has nothing to pick up.
  CHECK(g.diagnostics.lambda_term_norm <= 4.0 * g.diagnostics.contribution_std.maxCoeff() /
                                              std::sqrt(double(o.N)));
}

TEST_CASE("two-state estimate matches the quadrature value of the perturbed gradient") {
  const TwoStateParams p;
  auto env = two_state_env(p);
  const Policy pol(testing::tabular_spec(2, 2));
  Eigen::VectorXd theta(4);
  theta << 0.3, -0.2, -0.5, 0.4;
  const PolicyParams th{theta};
  const double eps = 0.4;
  const Eigen::VectorXd oracle = two_state_perturbed_grad(p, theta, 0.8, eps);

  EstimatorOptions o;
  o.eps = eps;
  o.N = 20000;
  o.n = 20;
  o.threads = 0;
  const GradEstimate g = estimate_policy_gradient(*env, pol, th, StateDist{0.2, 0.8}, o,
                                                  RngStream(31));
  const Eigen::ArrayXd bound = 4.0 * g.diagnostics.contribution_std.array() / std::sqrt(double(o.N));
  CHECK(((g.grad - oracle).array().abs() <= bound).all());
  // The perturbed gradient is a different target from the exact one at this eps.
  const Eigen::VectorXd fd = fd_gradient(*env, pol, th, StateDist{0.2, 0.8});
  CHECK((oracle - fd).lpNorm<Eigen::Infinity>() > 0.1);
  // eps -> 0 recovers the exact gradient (the kink keeps the rate sublinear).
  CHECK((two_state_perturbed_grad(p, theta, 0.8, 1e-3) - fd).lpNorm<Eigen::Infinity>() <= 0.05);
}

TEST_CASE("logit gradients are unbiased when the dynamics ignore mu") {
  auto env = testing::mu_free_env(3, 2, 3);
  const Policy pol(testing::tabular_spec(3, 2));
  const PolicyParams th = testing::random_params(6, RngStream(2), 0.5);
  const StateDist mu0{0.2, 0.5, 0.3};
  const Flow flow = compute_flow(*env, pol, th, mu0);
  const LogitGradient fd = fd_logit_gradient(*env, pol, th, mu0);
  const LogitGradient est = estimate_logit_gradients(*env, pol, th, flow, 0.5, 40000, RngStream(5), 0);
  CHECK(est.mats[0].isZero(0.0));
  for (std::size_t t = 1; t < est.mats.size(); ++t)
    CHECK((est.mats[t] - fd.mats[t]).lpNorm<Eigen::Infinity>() <= 0.05);
}

TEST_CASE("non-finite rewards name the offending trajectory") {
  FunctionEnv env(
      "nan", 2, 2, 2,
      [](std::size_t x, std::size_t a, std::span<const double>, std::span<double> out) {
        out[x] = a == 0 ? 0.9 : 0.4;
        out[1 - x] = 1.0 - out[x];
      },
      [](int t, std::size_t, std::size_t, std::span<const double>) {
        return t == 1 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
      },
      [](std::size_t, std::span<const double>) { return 0.0; }, 1.0);
  const Policy pol(testing::tabular_spec(2, 2));
  const Flow flow = compute_flow(env, pol, pol.zero_params(), StateDist{0.5, 0.5});
  for (int threads : {1, 4}) {
    EstimatorOptions o;
    o.N = 200;
    o.n = 2;
    o.threads = threads;
    try {
      estimate_policy_gradient(env, pol, pol.zero_params(), flow, o, RngStream(1));
      FAIL("expected NumericFailure");
    } catch (const NumericFailure& e) {
      CHECK(e.index() == 0);
    }
  }
}

TEST_CASE("estimator argument errors") {
  auto env = two_state_env({});
  const Policy pol(testing::tabular_spec(2, 2));
  const Flow flow = compute_flow(*env, pol, pol.zero_params(), StateDist{0.5, 0.5});
  EstimatorOptions o;
  o.N = 0;
  CHECK_THROWS_AS(estimate_policy_gradient(*env, pol, pol.zero_params(), flow, o, RngStream(1)),
                  InvalidArgument);
  o.N = 10;
  o.eps = 0.0;
  CHECK_THROWS_AS(estimate_policy_gradient(*env, pol, pol.zero_params(), flow, o, RngStream(1)),
                  InvalidArgument);
  CHECK_THROWS_AS(estimate_logit_gradients(*env, pol, pol.zero_params(), flow, 0.1, 0, RngStream(1)),
                  InvalidArgument);

  Flow bad = flow;
  bad.dists[1] = StateDist{1.0, 0.0};
  o.eps = 0.1;
  CHECK_THROWS_AS(estimate_policy_gradient(*env, pol, pol.zero_params(), bad, o, RngStream(1)),
                  FlowDegeneracy);

  CHECK(estimator_mode_from_string("shared") == EstimatorMode::shared);
  CHECK(baseline_from_string("mean_return") == Baseline::mean_return);
  CHECK(baseline_from_string(to_string(Baseline::mean_return)) == Baseline::mean_return);
  CHECK_THROWS_AS(estimator_mode_from_string("fast"), InvalidArgument);
}
