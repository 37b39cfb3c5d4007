#include "doctest.h"
#include "fixtures.hpp"

#include "mfpg/bench.hpp"
#include "mfpg/oracle.hpp"

#include <cmath>

using namespace mfpg;

namespace {

// V on the two-state env from the closed-form recursion of mu_t(1).
double two_state_value(const TwoStateParams& p, const Eigen::VectorXd& theta, double m1) {
  auto mv = [&](int x) { return 1.0 / (1.0 + std::exp(theta[2 * x] - theta[2 * x + 1])); };
  double v = 0.0;
  for (int t = 0; t <= p.T; ++t) {
    v += m1 - m1 * m1 - p.lam * std::abs(m1 - (1.0 - p.p));
    m1 = m1 * (1.0 - mv(1) * p.lambda1) + (1.0 - m1) * mv(0) * p.lambda0;
  }
  return v;
}

}  // namespace

TEST_CASE("exact value against the closed-form two-state recursion") {
  const TwoStateParams p;
  auto env = two_state_env(p);
  const Policy pol(testing::tabular_spec(2, 2));
  RngStream s(4);
  for (int rep = 0; rep < 10; ++rep) {
    const PolicyParams th = testing::random_params(4, s.child(std::uint64_t(rep)));
    const StateDist mu0 = testing::random_dist(2, s);
    CHECK(exact_value(*env, pol, th, mu0) ==
          doctest::Approx(two_state_value(p, th.values, mu0[1])).epsilon(1e-12));
  }
  // Under pi* from B every step pays r(B) = 0.4 - 0.16 = 0.24.
  const PolicyParams star = tabular_params_from_probs(two_state_optimal_policy(p));
  CHECK(exact_value(*env, pol, star, two_state_target(p)) == doctest::Approx(3 * 0.24));
}

TEST_CASE("constant rewards: V = (T + 1) c and zero gradient") {
  auto env = testing::constant_reward_env(-0.7, 4);
  const Policy pol(testing::mlp_spec(3, 2, 4, 4));
  const PolicyParams th = testing::random_params(pol.num_params(), RngStream(2));
  const StateDist mu0{0.2, 0.3, 0.5};
  CHECK(exact_value(*env, pol, th, mu0) == doctest::Approx(5 * -0.7));
  CHECK(fd_gradient(*env, pol, th, mu0).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("fd gradient is stable under step refinement and row shifts") {
  auto env = two_state_env({});
  const Policy pol(testing::tabular_spec(2, 2));
  const PolicyParams th = testing::random_params(4, RngStream(6));
  const StateDist mu0{0.3, 0.7};
  const Eigen::VectorXd g5 = fd_gradient(*env, pol, th, mu0, 1e-5);
  const Eigen::VectorXd g4 = fd_gradient(*env, pol, th, mu0, 1e-4);
  CHECK((g5 - g4).lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + g5.lpNorm<Eigen::Infinity>()));

  // Adding a constant to a row of tabular logits leaves the policy unchanged.
  PolicyParams shifted = th;
  shifted.values[0] += 3.0;
  shifted.values[1] += 3.0;
  CHECK(exact_value(*env, pol, shifted, mu0) ==
        doctest::Approx(exact_value(*env, pol, th, mu0)).epsilon(1e-13));
  // ... so the gradient sums to zero within each row.
  CHECK(std::abs(g5[0] + g5[1]) <= 1e-8);
  CHECK(std::abs(g5[2] + g5[3]) <= 1e-8);
}

TEST_CASE("decomposition identity on the two-state env") {
  const TwoStateParams p;
  auto env = two_state_env(p);
  const Policy pol(testing::tabular_spec(2, 2));
  const OracleReport r0 = exact_gradient_decomposition(*env, pol, pol.zero_params(), StateDist{0.2, 0.8});
  REQUIRE(r0.decomposition);
  CHECK(r0.gap <= 1e-4);
  CHECK(r0.gap <= r0.tolerance);
  CHECK((r0.decomposition->sum() - r0.grad_fd).lpNorm<Eigen::Infinity>() == doctest::Approx(r0.gap));
  // Rewards depend on mu, so the measure derivative is active.
  CHECK(r0.decomposition->md.lpNorm<Eigen::Infinity>() > 0.1);

  RngStream s(9);
  for (int rep = 0; rep < 5; ++rep) {
    const PolicyParams th = testing::random_params(4, s.child(std::uint64_t(rep)));
    CHECK(exact_gradient_decomposition(*env, pol, th, testing::random_dist(2, s)).gap <= 1e-4);
  }
}

TEST_CASE("mu-independent env has no measure terms") {
  auto env = testing::mu_free_env(3, 2, 2);
  const Policy pol(testing::tabular_spec(3, 2));
  const PolicyParams th = testing::random_params(6, RngStream(1));
  const OracleReport r = exact_gradient_decomposition(*env, pol, th, StateDist{0.3, 0.3, 0.4});
  CHECK(r.decomposition->md.lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(r.decomposition->mfd.lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK((r.decomposition->rf - r.grad_fd).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("decomposition with a mean-field policy on the cyber env") {
  auto env = cyber_env({})->with_horizon(2);
  const Policy pol(testing::mlp_spec(4, 2, 2, 3));
  const PolicyParams th = testing::random_params(pol.num_params(), RngStream(3), 0.8);
  const OracleReport r = exact_gradient_decomposition(*env, pol, th, StateDist{0.1, 0.2, 0.3, 0.4});
  CHECK(r.gap <= 1e-4);
  // Policy and kernel read mu; the cyber costs do not.
  CHECK(r.decomposition->mfd.lpNorm<Eigen::Infinity>() > 0.0);
  CHECK(r.decomposition->md.lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("oracle refuses oversized enumerations") {
  auto env = plan_env({});
  const Policy pol(testing::tabular_spec(10, 3));
  CHECK_THROWS_AS(exact_gradient_decomposition(*env, pol, pol.zero_params(), StateDist::uniform(10)),
                  OracleRefusal);
  CHECK_NOTHROW(exact_gradient_decomposition(*env->with_horizon(2), pol, pol.zero_params(),
                                             StateDist::uniform(10)));
}

TEST_CASE("value is invariant under relabeling the states") {
  const TwoStateParams p;
  auto env = two_state_env(p);
  auto swapped = testing::swapped_two_state(p);
  const Policy pol(testing::tabular_spec(2, 2));
  RngStream s(14);
  for (int rep = 0; rep < 5; ++rep) {
    const PolicyParams th = testing::random_params(4, s.child(std::uint64_t(rep)));
    PolicyParams th_sw = th;
    th_sw.values << th.values[2], th.values[3], th.values[0], th.values[1];
    const StateDist mu0 = testing::random_dist(2, s);
    const StateDist mu0_sw{mu0[1], mu0[0]};
    CHECK(exact_value(*swapped, pol, th_sw, mu0_sw) ==
          doctest::Approx(exact_value(*env, pol, th, mu0)).epsilon(1e-13));
  }
}

TEST_CASE("fd logit gradient") {
  const TwoStateParams p;
  auto env = two_state_env(p);
  const Policy pol(testing::tabular_spec(2, 2));
  const LogitGradient g = fd_logit_gradient(*env, pol, pol.zero_params(), StateDist{0.2, 0.8});
  REQUIRE(g.mats.size() == 3);
  CHECK(g.mats[0].isZero(0.0));
  // mu_1(1) = 0.8 (1 - 0.8 q1) + 0.2 * 0.5 q0 with q_x = pi(MV | x); at theta = 0, q_x = 1/2
  // and dq_x / d theta_(x, MV) = 1/4.
  const double m1 = 0.8 * (1 - 0.4) + 0.2 * 0.25;
  const double dm1_dmv1 = -0.8 * 0.8 * 0.25;
  CHECK(g.mats[1](1, 3) == doctest::Approx(dm1_dmv1 / m1).epsilon(1e-7));
  CHECK(g.mats[1](0, 3) == doctest::Approx(-dm1_dmv1 / (1 - m1)).epsilon(1e-7));
}

TEST_CASE("sampled value agrees with the exact value") {
  auto env = cyber_env({});
  const Policy pol(testing::tabular_spec(4, 2));
  const PolicyParams th = testing::random_params(8, RngStream(3));
  const StateDist mu0 = StateDist::uniform(4);
  const double exact = exact_value(*env, pol, th, mu0);
  const double sampled = sampled_value(*env, pol, th, mu0, 40000, RngStream(8));
  // Per-agent returns are bounded by (T + 1) dt (k_D + k_I) = 0.64.
  CHECK(std::abs(sampled - exact) <= 4.0 * 0.64 / std::sqrt(40000.0));

  const Flow flow = compute_flow(*env, pol, th, mu0);
  CHECK(inverse_mass_bound(flow) >= 16.0);
  CHECK(inverse_mass_bound(compute_flow(*env->with_horizon(0), pol, th, mu0)) == doctest::Approx(16.0));
}
