#include "mfpg/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mfpg {

namespace {

std::string degeneracy_message(int t, std::size_t state, double mass) {
  std::ostringstream os;
  os << "flow degeneracy at t=" << t << ": state " << state << " has mass " << mass
     << " below the interior floor " << kInteriorFloor;
  return os.str();
}

std::string numeric_message(const std::string& what, long index) {
  if (index < 0) return what;
  std::ostringstream os;
  os << what << " (index " << index << ")";
  return os.str();
}

}  // namespace

FlowDegeneracy::FlowDegeneracy(int t, std::size_t state, double mass)
    : std::runtime_error(degeneracy_message(t, state, mass)), t_(t), state_(state) {}

NumericFailure::NumericFailure(const std::string& what, long index)
    : std::runtime_error(numeric_message(what, index)), index_(index) {}

StateDist::StateDist(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw InvalidArgument("StateDist: empty probability vector");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs_.size(); ++i) {
    const double p = probs_[i];
    if (!std::isfinite(p) || p < 0.0)
      throw InvalidArgument("StateDist: entries must be finite and non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "StateDist: entries sum to " << sum << ", expected 1";
    throw InvalidArgument(os.str());
  }
  probs_ /= sum;
}

StateDist::StateDist(std::initializer_list<double> probs)
    : StateDist(Eigen::Map<const Eigen::VectorXd>(probs.begin(),
                                                   static_cast<Eigen::Index>(probs.size()))) {}

StateDist StateDist::uniform(std::size_t d) {
  return StateDist(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), 1.0 / double(d)));
}

StateDist StateDist::point_mass(std::size_t d, std::size_t x) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  p[static_cast<Eigen::Index>(x)] = 1.0;
  return StateDist(std::move(p));
}

bool StateDist::interior() const { return probs_.minCoeff() >= kInteriorFloor; }

std::size_t StateDist::argmin() const {
  Eigen::Index i = 0;
  probs_.minCoeff(&i);
  return static_cast<std::size_t>(i);
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("logsumexp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

StateDist softmax(const LogitVec& l) {
  if (l.size() == 0) throw InvalidArgument("softmax: empty input");
  if (!l.values.allFinite()) throw InvalidArgument("softmax: non-finite logits");
  Eigen::VectorXd p = (l.values.array() - l.values.maxCoeff()).exp();
  p /= p.sum();
  return StateDist(std::move(p));
}

LogitVec logit(const StateDist& mu) {
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] < kInteriorFloor) {
      std::ostringstream os;
      os << "logit: entry " << i << " = " << mu[i] << " is outside P(X)*";
      throw DomainError(os.str());
    }
  }
  return LogitVec{mu.probs().array().log().matrix()};
}

void perturbed_softmax(std::span<const double> l, std::span<const double> lambda, double eps,
                       std::span<double> out) {
  const std::size_t d = l.size();
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = l[i] + eps * lambda[i];
    m = std::max(m, out[i]);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = std::exp(out[i] - m);
    s += out[i];
  }
  for (std::size_t i = 0; i < d; ++i) out[i] /= s;
}

double tv_distance(const StateDist& mu, const StateDist& nu) {
  if (mu.size() != nu.size()) throw InvalidArgument("tv_distance: dimension mismatch");
  return 0.5 * (mu.probs() - nu.probs()).cwiseAbs().sum();
}

double kl_divergence(const StateDist& mu, const StateDist& nu) {
  if (mu.size() != nu.size()) throw InvalidArgument("kl_divergence: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] == 0.0) continue;
    if (nu[i] <= 0.0)
      throw DomainError("kl_divergence: reference has zero mass where mu is positive");
    kl += mu[i] * std::log(mu[i] / nu[i]);
  }
  return std::max(kl, 0.0);
}

}  // namespace mfpg
