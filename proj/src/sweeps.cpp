#include "mfpg/sweeps.hpp"

#include <cmath>

namespace mfpg {

std::vector<BiasRow> bias_sweep(const MeanFieldEnv& env, const Policy& policy,
                                const PolicyParams& theta, const StateDist& mu0,
                                const Eigen::VectorXd& reference, const std::vector<double>& eps_list,
                                const std::vector<std::uint64_t>& seeds, EstimatorOptions opts) {
  if (eps_list.size() < 2) throw InvalidArgument("bias_sweep: need at least two eps values");
  if (seeds.empty()) throw InvalidArgument("bias_sweep: need at least one seed");
  const Flow flow = compute_flow(env, policy, theta, mu0);
  std::vector<BiasRow> rows;
  for (double eps : eps_list) {
    opts.eps = eps;
    for (std::uint64_t seed : seeds) {
      const GradEstimate g = estimate_policy_gradient(env, policy, theta, flow, opts, RngStream(seed));
      BiasRow r;
      r.eps = eps;
      r.bias_maxnorm = (g.grad - reference).lpNorm<Eigen::Infinity>();
      r.mc_std = g.diagnostics.contribution_std.maxCoeff() / std::sqrt(double(opts.N));
      r.seed = seed;
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<MseRow> mse_sweep(const MeanFieldEnv& env, const Policy& policy,
                              const PolicyParams& theta, const StateDist& mu0,
                              const Eigen::VectorXd& reference, const std::vector<std::size_t>& N_list,
                              std::size_t replications, std::uint64_t seed, EstimatorOptions opts) {
  if (N_list.size() < 2) throw InvalidArgument("mse_sweep: need at least two N values");
  if (replications < 2) throw InvalidArgument("mse_sweep: need at least two replications");
  const Flow flow = compute_flow(env, policy, theta, mu0);
  const Eigen::Index D = Eigen::Index(policy.num_params());
  std::vector<MseRow> rows;
  for (std::size_t N : N_list) {
    opts.N = N;
    Eigen::MatrixXd est(D, Eigen::Index(replications));
    for (std::size_t r = 0; r < replications; ++r)
      est.col(Eigen::Index(r)) =
          estimate_policy_gradient(env, policy, theta, flow, opts, RngStream(seed).child(r)).grad;
    const Eigen::VectorXd mean = est.rowwise().mean();
    const Eigen::MatrixXd centered = est.colwise() - mean;
    const Eigen::VectorXd var = centered.rowwise().squaredNorm() / double(replications - 1);
    const Eigen::VectorXd mse = (est.colwise() - reference).rowwise().squaredNorm() / double(replications);
    rows.push_back({N, var.maxCoeff(), mse.maxCoeff()});
  }
  return rows;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw DomainError("loglog_slope: x values are all equal");
  return sxy / sxx;
}

}  // namespace mfpg
