#pragma once

#include "mfpg/env.hpp"
#include "mfpg/policy.hpp"

#include <array>
#include <memory>

namespace mfpg {

// ---------------------------------------------------------------------------------------------
// Two-state, two-action toy problem. States {0, 1}; actions ST = 0, MV = 1.
// Moving from x flips the state with probability lambda_x. The population target B puts mass
// p on state 0 and 1 - p on state 1, which is where pi* drives the flow.

inline constexpr std::size_t kStay = 0;
inline constexpr std::size_t kMove = 1;

struct TwoStateParams {
  double lambda0 = 0.5;
  double lambda1 = 0.8;
  double lam = 10.0;
  double p = 0.6;
  int T = 2;
};

std::unique_ptr<MeanFieldEnv> two_state_env(const TwoStateParams& params);

/// Target distribution B = (p, 1 - p).
StateDist two_state_target(const TwoStateParams& params);

/// Stationary optimal policy as a 2 x 2 probability table (rows x, columns ST, MV):
/// pi*(MV | 0) = (1 - p) / lambda0, pi*(MV | 1) = p / lambda1.
Eigen::MatrixXd two_state_optimal_policy(const TwoStateParams& params);

/// Tabular logits reproducing a probability table; zero entries are floored at 1e-12.
PolicyParams tabular_params_from_probs(const Eigen::MatrixXd& probs);

// ---------------------------------------------------------------------------------------------
// Cybersecurity model. States DI, DS, UI, US; actions 0 (keep) and 1 (switch protection).

enum CyberState : std::size_t { kDI = 0, kDS = 1, kUI = 2, kUS = 3 };

struct CyberParams {
  double beta_UU = 0.3;
  double beta_UD = 0.4;
  double beta_DU = 0.3;
  double beta_DD = 0.4;
  double q_rec_D = 0.5;
  double q_rec_U = 0.4;
  double q_inf_D = 0.4;
  double q_inf_U = 0.3;
  double v_H = 0.6;
  double lambda_rate = 0.8;
  double k_D = 0.3;
  double k_I = 0.5;
  double dt = 0.2;
  double gamma = 0.5;
  int T_train = 3;
  int T_val = 50;
};

/// Continuous-time generator Q^{mu, a}; rows sum to zero.
Eigen::Matrix4d cyber_generator(const CyberParams& params, std::span<const double> mu,
                                std::size_t a);

/// Environment with horizon params.T_train.
std::unique_ptr<MeanFieldEnv> cyber_env(const CyberParams& params);

/// Matrix exponential by scaling and squaring with a [6/6] Pade approximant.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

// ---------------------------------------------------------------------------------------------
// Distribution planning on the cycle Z/nZ; actions -1, 0, +1 (indices 0, 1, 2).

struct PlanParams {
  std::size_t n_states = 10;
  double move_cost = 0.01;
  Eigen::VectorXd target = default_plan_target();
  int T = 5;

  static Eigen::VectorXd default_plan_target();
};

std::unique_ptr<MeanFieldEnv> plan_env(const PlanParams& params);

/// Sum of squared deviations from the target.
double plan_target_gap(const PlanParams& params, std::span<const double> mu);

}  // namespace mfpg
