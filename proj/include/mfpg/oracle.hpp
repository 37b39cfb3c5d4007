#pragma once

#include "mfpg/env.hpp"
#include "mfpg/estimators.hpp"
#include "mfpg/flow.hpp"
#include "mfpg/policy.hpp"
#include "mfpg/rng.hpp"

#include <optional>

namespace mfpg {

inline constexpr double kDefaultFdStep = 1e-5;
inline constexpr double kDefaultEnumerationCap = 1e6;

/// The three parts of the exact policy gradient: the REINFORCE term, the measure derivative of
/// the rewards, and the mean-field derivative of the policy and kernel.
struct Decomposition {
  Eigen::VectorXd rf, md, mfd;

  Eigen::VectorXd sum() const { return rf + md + mfd; }
};

struct OracleReport {
  double value = 0.0;
  Eigen::VectorXd grad_fd;
  std::optional<Decomposition> decomposition;
  double fd_step = kDefaultFdStep;
  /// ||rf + md + mfd - grad_fd||_inf, and the bound it is expected to satisfy.
  double gap = 0.0;
  double tolerance = 0.0;
};

/// V(theta, mu0) summed exactly along the deterministic flow.
double exact_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                   const StateDist& mu0);

/// Same, given the flow.
double exact_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                   const Flow& flow);

/// Central differences of exact_value, one coordinate at a time.
Eigen::VectorXd fd_gradient(const MeanFieldEnv& env, const Policy& policy,
                            const PolicyParams& theta, const StateDist& mu0,
                            double h = kDefaultFdStep);

/// Central differences of logit(mu_t) with respect to theta, for every t. mats[0] is zero.
LogitGradient fd_logit_gradient(const MeanFieldEnv& env, const Policy& policy,
                                const PolicyParams& theta, const StateDist& mu0,
                                double h = kDefaultFdStep);

/// RF, MD and MFD by exhaustive enumeration of the trajectory law, with measure derivatives
/// taken by central differences in the logit argument. Refuses (OracleRefusal) when
/// (|X| |A|)^T exceeds cap.
OracleReport exact_gradient_decomposition(const MeanFieldEnv& env, const Policy& policy,
                                          const PolicyParams& theta, const StateDist& mu0,
                                          double h = kDefaultFdStep,
                                          double cap = kDefaultEnumerationCap);

/// Population reward estimated from `agents` independent sampled trajectories run against the
/// exact flow. This is the sampled validation protocol.
double sampled_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                     const StateDist& mu0, std::size_t agents, const RngStream& stream);

/// sup_t sum_i 1 / mu_t(i): how close the flow comes to the boundary of the simplex.
double inverse_mass_bound(const Flow& flow);

}  // namespace mfpg
