#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>

namespace mfpg {

// Error taxonomy. The CLI maps these onto exit codes.

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// The population flow left P(X)*: some state's mass fell below the interior floor.
class FlowDegeneracy : public std::runtime_error {
 public:
  FlowDegeneracy(int t, std::size_t state, double mass);
  int time() const { return t_; }
  std::size_t state() const { return state_; }

 private:
  int t_;
  std::size_t state_;
};

/// NaN/Inf in an accumulation. `index` names the offending trajectory or episode (-1 if none).
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, long index = -1);
  long index() const { return index_; }

 private:
  long index_;
};

/// The exact oracle refused because the enumeration would be too large.
class OracleRefusal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entries below this are treated as outside P(X)*.
inline constexpr double kInteriorFloor = 1e-12;

/// A probability vector over the finite state space.
class StateDist {
 public:
  StateDist() = default;
  /// Validates non-negativity and |sum - 1| <= 1e-9, then renormalizes.
  explicit StateDist(Eigen::VectorXd probs);
  StateDist(std::initializer_list<double> probs);

  static StateDist uniform(std::size_t d);
  static StateDist point_mass(std::size_t d, std::size_t x);

  std::size_t size() const { return static_cast<std::size_t>(probs_.size()); }
  double operator[](std::size_t i) const { return probs_[static_cast<Eigen::Index>(i)]; }
  const Eigen::VectorXd& probs() const { return probs_; }
  std::span<const double> span() const { return {probs_.data(), size()}; }

  /// All entries >= kInteriorFloor.
  bool interior() const;
  /// Index of the smallest entry.
  std::size_t argmin() const;

 private:
  Eigen::VectorXd probs_;
};

/// Log-probabilities of an interior distribution.
struct LogitVec {
  Eigen::VectorXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
};

double logsumexp(std::span<const double> v);

StateDist softmax(const LogitVec& l);
LogitVec logit(const StateDist& mu);

/// Writes softmax(l + eps * lambda) into out without allocating. Used by the samplers.
void perturbed_softmax(std::span<const double> l, std::span<const double> lambda, double eps,
                       std::span<double> out);

double tv_distance(const StateDist& mu, const StateDist& nu);
double kl_divergence(const StateDist& mu, const StateDist& nu);

}  // namespace mfpg
