#pragma once

#include "mfpg/core.hpp"
#include "mfpg/env.hpp"
#include "mfpg/policy.hpp"

#include <vector>

namespace mfpg {

/// The deterministic mean-field flow mu_0 .. mu_T and its logits.
struct Flow {
  std::vector<StateDist> dists;
  std::vector<LogitVec> logits;

  int horizon() const { return static_cast<int>(dists.size()) - 1; }
};

/// Population simulator: mu_{t+1}(x') = sum_x sum_a pi(a | t, x, mu_t) P(x' | x, a, mu_t) mu_t(x).
/// Throws FlowDegeneracy if the result leaves the interior.
StateDist propagate_flow(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                         const StateDist& mu_t, int t);

/// Repeated propagate_flow for t = 0 .. T-1, where T = env.horizon().
Flow compute_flow(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                  const StateDist& mu0);

}  // namespace mfpg
