#pragma once

#include "mfpg/env.hpp"
#include "mfpg/estimators.hpp"
#include "mfpg/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace mfpg {

/// Law of the initial distribution drawn at the start of each training episode.
struct InitSampler {
  enum class Kind { uniform_state1, dirichlet };

  Kind kind = Kind::dirichlet;
  double low = 0.1;        // uniform_state1: mu(1) ~ U(low, high), mu(0) = 1 - mu(1)
  double high = 0.9;
  double min_mass = 0.01;  // dirichlet: Dirichlet(1, ..., 1) shrunk so every entry >= min_mass

  StateDist sample(std::size_t d, RngStream& stream) const;
};

struct TrainConfig {
  std::size_t episodes = 5000;
  std::size_t N = 200;
  std::size_t n = 10;
  double eps = 0.2;
  double lr = 1e-3;
  std::size_t val_every = 10;
  std::uint64_t seed = 0;
  EstimatorMode mode = EstimatorMode::faithful;
  Baseline baseline = Baseline::none;
  int threads = 1;
  InitSampler init;
  std::optional<StateDist> val_mu0;  // uniform when unset
  std::optional<int> val_horizon;    // env horizon when unset
  std::size_t checkpoint_every = 0;  // 0: no intermediate checkpoints
  bool sampled_validation = false;
  std::size_t val_samples = 1000;
  bool record_wall_time = true;
  double max_abort_fraction = 0.01;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m, v;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;

  static AdamState zeros(std::size_t D);
};

/// One Adam ascent step: theta + lr * m_hat / (sqrt(v_hat) + eps_adam).
/// A non-finite gradient throws NumericFailure and leaves the inputs untouched.
std::pair<AdamState, PolicyParams> adam_step(const AdamState& state, const PolicyParams& theta,
                                             const Eigen::VectorXd& grad, double lr);

struct MetricsRow {
  std::size_t episode = 0;  // completed episodes
  double val_reward = 0.0;
  double grad_norm = 0.0;   // L2 norm of the most recent gradient estimate
  std::size_t aborted = 0;  // aborted episodes so far
  double wall_time_s = 0.0;
};

struct TrainResult {
  PolicyParams theta;
  std::vector<MetricsRow> metrics;
  std::size_t aborted = 0;
};

struct TrainHooks {
  /// Called every checkpoint_every completed episodes.
  std::function<void(std::size_t episode, const PolicyParams&)> on_checkpoint;
  /// Called for every validation row as it is produced.
  std::function<void(const MetricsRow&)> on_metrics;
};

/// Initial parameters for a run: zeros for tabular, seeded uniform init for MLP.
PolicyParams initial_theta(const Policy& policy, std::uint64_t seed);

/// Adam ascent on V with MF-REINFORCE gradients. Episode e draws from
/// RngStream(seed).child(0).child(e); sampled validation uses child(1).
TrainResult train(const MeanFieldEnv& env, const PolicySpec& spec, const TrainConfig& cfg,
                  const TrainHooks& hooks = {}, std::optional<PolicyParams> theta0 = {});

/// Validation value of theta under cfg (exact, or sampled when cfg.sampled_validation).
double validation_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                        const TrainConfig& cfg, std::size_t episode);

inline constexpr const char* kMetricsHeader = "episode,val_reward,grad_norm,aborted,wall_time_s";

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

}  // namespace mfpg
