#pragma once

#include "mfpg/estimators.hpp"

#include <cstdint>
#include <vector>

namespace mfpg {

struct BiasRow {
  double eps = 0.0;
  double bias_maxnorm = 0.0;  // ||estimate - fd||_inf
  double mc_std = 0.0;        // max_j contribution std_j / sqrt(N)
  std::uint64_t seed = 0;
};

struct MseRow {
  std::size_t N = 0;
  double var_per_coord_max = 0.0;
  double mse_per_coord_max = 0.0;
};

/// One estimate per (eps, seed). Each seed uses the same stream for every eps, so the rows for
/// one seed differ only through eps.
std::vector<BiasRow> bias_sweep(const MeanFieldEnv& env, const Policy& policy,
                                const PolicyParams& theta, const StateDist& mu0,
                                const Eigen::VectorXd& reference, const std::vector<double>& eps_list,
                                const std::vector<std::uint64_t>& seeds, EstimatorOptions opts);

/// Replication r uses RngStream(seed).child(r) for every N. Variance and MSE (against
/// `reference`) are per coordinate over the replications; the rows keep the max over coordinates.
std::vector<MseRow> mse_sweep(const MeanFieldEnv& env, const Policy& policy,
                              const PolicyParams& theta, const StateDist& mu0,
                              const Eigen::VectorXd& reference, const std::vector<std::size_t>& N_list,
                              std::size_t replications, std::uint64_t seed, EstimatorOptions opts);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mfpg
