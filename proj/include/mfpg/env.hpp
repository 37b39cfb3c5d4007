#pragma once

#include "mfpg/core.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>

namespace mfpg {

/// A finite-state, finite-action mean-field MDP with horizon T.
///
/// Implementations are immutable after construction and safe to share across threads.
/// `mu` arguments are probability vectors of length num_states(); they are passed as spans so
/// samplers can evaluate at perturbed measures without building a StateDist each step.
class MeanFieldEnv {
 public:
  virtual ~MeanFieldEnv() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual int horizon() const = 0;

  /// Reference weight nu_A(a) of each action. Policies here are probability mass functions,
  /// so the default is the counting measure.
  virtual double action_weight(std::size_t /*a*/) const { return 1.0; }

  /// Writes P(. | x, a, mu) into out (length num_states()).
  virtual void transition(std::size_t x, std::size_t a, std::span<const double> mu,
                          std::span<double> out) const = 0;
  /// Writes the full d x d kernel for action a (row x = P(. | x, a, mu)).
  /// Override when rows share work (e.g. a matrix exponential).
  virtual void transition_matrix(std::size_t a, std::span<const double> mu,
                                 Eigen::MatrixXd& out) const;

  virtual double reward(int t, std::size_t x, std::size_t a, std::span<const double> mu) const = 0;
  virtual double terminal_reward(std::size_t x, std::span<const double> mu) const = 0;

  /// Declared bound M0 on |reward| and |terminal_reward|.
  virtual double reward_bound() const = 0;

  /// Copy of this environment with a different horizon (rewards that depend on t, such as
  /// discounting, follow the new horizon).
  virtual std::unique_ptr<MeanFieldEnv> with_horizon(int T) const = 0;
};

/// Environment assembled from callables. Used for test fixtures and ad-hoc models.
class FunctionEnv final : public MeanFieldEnv {
 public:
  using TransitionFn =
      std::function<void(std::size_t, std::size_t, std::span<const double>, std::span<double>)>;
  using RewardFn = std::function<double(int, std::size_t, std::size_t, std::span<const double>)>;
  using TerminalFn = std::function<double(std::size_t, std::span<const double>)>;

  FunctionEnv(std::string name, std::size_t d, std::size_t n_actions, int T,
              TransitionFn transition, RewardFn reward, TerminalFn terminal, double bound);

  std::string name() const override { return name_; }
  std::size_t num_states() const override { return d_; }
  std::size_t num_actions() const override { return n_actions_; }
  int horizon() const override { return T_; }
  void transition(std::size_t x, std::size_t a, std::span<const double> mu,
                  std::span<double> out) const override {
    transition_(x, a, mu, out);
  }
  double reward(int t, std::size_t x, std::size_t a, std::span<const double> mu) const override {
    return reward_(t, x, a, mu);
  }
  double terminal_reward(std::size_t x, std::span<const double> mu) const override {
    return terminal_(x, mu);
  }
  double reward_bound() const override { return bound_; }
  std::unique_ptr<MeanFieldEnv> with_horizon(int T) const override;

 private:
  std::string name_;
  std::size_t d_;
  std::size_t n_actions_;
  int T_;
  TransitionFn transition_;
  RewardFn reward_;
  TerminalFn terminal_;
  double bound_;
};

}  // namespace mfpg
