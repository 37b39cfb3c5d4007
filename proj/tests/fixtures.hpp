#pragma once

#include "mfpg/bench.hpp"
#include "mfpg/env.hpp"
#include "mfpg/flow.hpp"
#include "mfpg/policy.hpp"
#include "mfpg/rng.hpp"

#include <array>
#include <cmath>
#include <memory>

namespace mfpg::testing {

inline PolicySpec tabular_spec(std::size_t d, std::size_t A) {
  PolicySpec s;
  s.kind = PolicyKind::tabular;
  s.num_states = d;
  s.num_actions = A;
  return s;
}

inline PolicySpec mlp_spec(std::size_t d, std::size_t A, int horizon, std::size_t hidden = 8) {
  PolicySpec s;
  s.kind = PolicyKind::mlp;
  s.num_states = d;
  s.num_actions = A;
  s.hidden = hidden;
  s.time_horizon = horizon;
  return s;
}

inline PolicyParams random_params(std::size_t D, RngStream stream, double scale = 1.0) {
  PolicyParams p{Eigen::VectorXd(static_cast<Eigen::Index>(D))};
  for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values[i] = scale * stream.normal();
  return p;
}

/// Random interior distribution with every entry >= floor.
inline StateDist random_dist(std::size_t d, RngStream& stream, double floor = 0.02) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = -std::log1p(-stream.uniform());
  p /= p.sum();
  p = (floor + (1.0 - double(d) * floor) * p.array()).matrix();
  return StateDist(p);
}

/// d states, A actions, kernel and rewards that ignore mu. Action a moves x to (x + a) mod d
/// with probability 0.7, otherwise stays.
inline std::unique_ptr<MeanFieldEnv> mu_free_env(std::size_t d, std::size_t A, int T) {
  return std::make_unique<FunctionEnv>(
      "mu_free", d, A, T,
      [d](std::size_t x, std::size_t a, std::span<const double>, std::span<double> out) {
        for (std::size_t i = 0; i < d; ++i) out[i] = 0.0;
        out[x] += 0.3;
        out[(x + a) % d] += 0.7;
      },
      [](int t, std::size_t x, std::size_t a, std::span<const double>) {
        return std::sin(1.0 + double(x)) + 0.25 * double(a) - 0.1 * t;
      },
      [](std::size_t x, std::span<const double>) { return std::cos(double(x)); }, 3.0);
}

/// Mixing kernel that depends on mu, with every reward equal to c.
inline std::unique_ptr<MeanFieldEnv> constant_reward_env(double c, int T) {
  return std::make_unique<FunctionEnv>(
      "constant", 3, 2, T,
      [](std::size_t x, std::size_t a, std::span<const double> mu, std::span<double> out) {
        const double stay = 0.2 + 0.5 * mu[x] + 0.1 * double(a);
        for (std::size_t i = 0; i < 3; ++i) out[i] = (1.0 - stay) / 2.0;
        out[x] = stay;
      },
      [c](int, std::size_t, std::size_t, std::span<const double>) { return c; },
      [c](std::size_t, std::span<const double>) { return c; }, std::abs(c));
}

/// Two-state env with states relabeled 0 <-> 1 (same parameters).
inline std::unique_ptr<MeanFieldEnv> swapped_two_state(const TwoStateParams& p) {
  auto base = std::shared_ptr<MeanFieldEnv>(two_state_env(p));
  auto swap = [](std::span<const double> mu) { return std::array<double, 2>{mu[1], mu[0]}; };
  return std::make_unique<FunctionEnv>(
      "two_state_swapped", 2, 2, p.T,
      [base, swap](std::size_t x, std::size_t a, std::span<const double> mu, std::span<double> out) {
        const auto m = swap(mu);
        double tmp[2];
        base->transition(1 - x, a, m, tmp);
        out[0] = tmp[1];
        out[1] = tmp[0];
      },
      [base, swap](int t, std::size_t x, std::size_t a, std::span<const double> mu) {
        return base->reward(t, 1 - x, a, swap(mu));
      },
      [base, swap](std::size_t x, std::span<const double> mu) {
        return base->terminal_reward(1 - x, swap(mu));
      },
      base->reward_bound());
}

}  // namespace mfpg::testing
