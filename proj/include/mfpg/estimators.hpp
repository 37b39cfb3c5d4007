#pragma once

#include "mfpg/core.hpp"
#include "mfpg/env.hpp"
#include "mfpg/flow.hpp"
#include "mfpg/policy.hpp"
#include "mfpg/rng.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mfpg {

/// Gaussian logit perturbations Lambda_0 .. Lambda_T, one row per time step.
struct PerturbationSeq {
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Matrix lambdas;  // (T + 1) x d

  std::size_t horizon() const { return static_cast<std::size_t>(lambdas.rows()) - 1; }
  std::span<const double> row(std::size_t t) const {
    return {lambdas.data() + t * std::size_t(lambdas.cols()), std::size_t(lambdas.cols())};
  }
};

/// One coupled sample of the nominal process X (measure argument mu_t) and the perturbed
/// process Y (measure argument softmax(l_t + eps Lambda_t)).
struct TrajectoryPair {
  std::vector<std::size_t> x_states, y_states;    // length T + 1
  std::vector<std::size_t> x_actions, y_actions;  // length T
  PerturbationSeq lambdas;
  std::vector<double> x_rewards, y_rewards;  // length T
  double x_terminal = 0.0;
  double y_terminal = 0.0;
  double eps = 0.0;
};

/// Estimates of the Jacobians d l_t / d theta, t = 0 .. T (each d x D). mats[0] is zero.
struct LogitGradient {
  std::vector<Eigen::MatrixXd> mats;
};

enum class EstimatorMode { faithful, shared };
enum class Baseline { none, mean_return };

std::string to_string(EstimatorMode mode);
std::string to_string(Baseline baseline);
EstimatorMode estimator_mode_from_string(const std::string& s);
Baseline baseline_from_string(const std::string& s);

struct EstimatorOptions {
  double eps = 0.2;
  std::size_t N = 200;  // trajectory pairs
  std::size_t n = 10;   // logit-gradient trajectories per time step
  EstimatorMode mode = EstimatorMode::faithful;
  Baseline baseline = Baseline::none;
  int threads = 1;
};

struct GradDiagnostics {
  double lambda_term_norm = 0.0;  // ||mean of the eps^-1 Lambda . mats . G part||_inf
  double score_term_norm = 0.0;   // ||mean of the score . G part||_inf
  double y_return_mean = 0.0;     // perturbed return G_0^eps
  double y_return_std = 0.0;
  double x_return_mean = 0.0;     // nominal return, an unbiased estimate of V
  double x_return_std = 0.0;
  /// Per-coordinate sample std of the per-pair contributions (no baseline applied).
  Eigen::VectorXd contribution_std;
  /// Set in shared mode: the N pairs reuse one logit-gradient run, so they are not independent.
  bool shared_logit_gradients = false;
};

struct GradEstimate {
  Eigen::VectorXd grad;
  std::size_t n_traj = 0;
  double eps = 0.0;
  GradDiagnostics diagnostics;
};

/// Samples X and Y with fresh Lambda drawn from stream.child(0); X uses stream.child(1) and Y
/// uses stream.child(2).
TrajectoryPair rollout_pair(const MeanFieldEnv& env, const Policy& policy,
                            const PolicyParams& theta, const Flow& flow, double eps,
                            const RngStream& stream);

/// Same, with the perturbations supplied by the caller.
TrajectoryPair rollout_pair(const MeanFieldEnv& env, const Policy& policy,
                            const PolicyParams& theta, const Flow& flow, double eps,
                            const PerturbationSeq& lambdas, const RngStream& stream);

/// Reward-to-go for X and Y: g[T] = terminal, g[t] = reward[t] + g[t + 1].
std::pair<std::vector<double>, std::vector<double>> returns(const TrajectoryPair& pair);

/// Reward-to-go of a single stream.
std::vector<double> reward_to_go(std::span<const double> rewards, double terminal);

/// State-distribution gradient estimator (forward substitution in t). Each t = 1 .. T uses n
/// fresh perturbed trajectories truncated at t, drawn from stream.child(t).child(k).
LogitGradient estimate_logit_gradients(const MeanFieldEnv& env, const Policy& policy,
                                       const PolicyParams& theta, const Flow& flow, double eps,
                                       std::size_t n, const RngStream& stream, int threads = 1);

/// MF-REINFORCE policy-gradient estimate at mu0. Pair k uses stream.child(0).child(k):
/// child(0) for the rollout and, in faithful mode, child(1) for its own logit-gradient run. Shared
/// mode runs it once from stream.child(1).
GradEstimate estimate_policy_gradient(const MeanFieldEnv& env, const Policy& policy,
                                      const PolicyParams& theta, const StateDist& mu0,
                                      const EstimatorOptions& opts, const RngStream& stream);

/// Same, reusing a precomputed flow from mu0.
GradEstimate estimate_policy_gradient(const MeanFieldEnv& env, const Policy& policy,
                                      const PolicyParams& theta, const Flow& flow,
                                      const EstimatorOptions& opts, const RngStream& stream);

/// Serial transcription of the two estimators, one trajectory at a time, with the same
/// stream layout. Kept as the reference the blocked OpenMP kernels are tested against.
namespace reference {

LogitGradient estimate_logit_gradients(const MeanFieldEnv& env, const Policy& policy,
                                       const PolicyParams& theta, const Flow& flow, double eps,
                                       std::size_t n, const RngStream& stream);

GradEstimate estimate_policy_gradient(const MeanFieldEnv& env, const Policy& policy,
                                      const PolicyParams& theta, const Flow& flow,
                                      const EstimatorOptions& opts, const RngStream& stream);

}  // namespace reference

}  // namespace mfpg
