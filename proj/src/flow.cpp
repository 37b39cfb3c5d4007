#include "mfpg/flow.hpp"

#include <sstream>

namespace mfpg {

StateDist propagate_flow(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                         const StateDist& mu_t, int t) {
  const std::size_t d = env.num_states();
  if (mu_t.size() != d) throw InvalidArgument("propagate_flow: distribution size mismatch");
  if (policy.num_states() != d || policy.num_actions() != env.num_actions())
    throw InvalidArgument("propagate_flow: policy does not match the environment");
  if (t < 0 || t >= env.horizon()) {
    std::ostringstream os;
    os << "propagate_flow: t=" << t << " outside [0, " << env.horizon() << ")";
    throw InvalidArgument(os.str());
  }
  if (!mu_t.interior()) throw FlowDegeneracy(t, mu_t.argmin(), mu_t[mu_t.argmin()]);

  Eigen::MatrixXd table;
  policy.action_table(theta, t, mu_t.span(), table);
  Eigen::MatrixXd kernel;
  Eigen::VectorXd next = Eigen::VectorXd::Zero(Eigen::Index(d));
  for (std::size_t a = 0; a < env.num_actions(); ++a) {
    env.transition_matrix(a, mu_t.span(), kernel);
    // weights(x) = mu_t(x) pi(a | x)
    const Eigen::VectorXd weights = mu_t.probs().cwiseProduct(table.col(Eigen::Index(a)));
    next.noalias() += kernel.transpose() * weights;
  }
  for (std::size_t x = 0; x < d; ++x)
    if (next[Eigen::Index(x)] < kInteriorFloor) throw FlowDegeneracy(t + 1, x, next[Eigen::Index(x)]);
  return StateDist(std::move(next));
}

Flow compute_flow(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                  const StateDist& mu0) {
  if (!mu0.interior()) throw FlowDegeneracy(0, mu0.argmin(), mu0[mu0.argmin()]);
  Flow flow;
  const int T = env.horizon();
  flow.dists.reserve(std::size_t(T) + 1);
  flow.logits.reserve(std::size_t(T) + 1);
  flow.dists.push_back(mu0);
  flow.logits.push_back(logit(mu0));
  for (int t = 0; t < T; ++t) {
    flow.dists.push_back(propagate_flow(env, policy, theta, flow.dists.back(), t));
    flow.logits.push_back(logit(flow.dists.back()));
  }
  return flow;
}

}  // namespace mfpg
