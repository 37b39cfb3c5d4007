#include "mfpg/trainer.hpp"

#include "mfpg/flow.hpp"
#include "mfpg/oracle.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mfpg {

StateDist InitSampler::sample(std::size_t d, RngStream& stream) const {
  if (kind == Kind::uniform_state1) {
    if (d != 2) throw InvalidArgument("init sampler uniform_state1 needs a two-state env");
    const double m1 = low + (high - low) * stream.uniform();
    return StateDist{1.0 - m1, m1};
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = -std::log1p(-stream.uniform());
  p /= p.sum();
  p = (min_mass + (1.0 - double(d) * min_mass) * p.array()).matrix();
  return StateDist(p);
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw InvalidArgument("train." + field + ": " + why);
  };
  if (N < 1) fail("N", "must be >= 1");
  if (n < 1) fail("n", "must be >= 1");
  if (!(eps > 0.0) || !std::isfinite(eps)) fail("eps", "must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr", "must be non-negative");
  if (val_every < 1) fail("val_every", "must be >= 1");
  if (val_horizon && *val_horizon < 0) fail("val_horizon", "must be non-negative");
  if (val_samples < 1) fail("val_samples", "must be >= 1");
  if (!(max_abort_fraction >= 0.0 && max_abort_fraction <= 1.0))
    fail("max_abort_fraction", "must lie in [0, 1]");
  if (init.kind == InitSampler::Kind::uniform_state1 &&
      !(0.0 < init.low && init.low <= init.high && init.high < 1.0))
    fail("init", "need 0 < low <= high < 1");
  if (init.kind == InitSampler::Kind::dirichlet && !(init.min_mass > 0.0 && init.min_mass < 0.5))
    fail("init.min_mass", "must lie in (0, 0.5)");
}

AdamState AdamState::zeros(std::size_t D) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(Eigen::Index(D));
  s.v = Eigen::VectorXd::Zero(Eigen::Index(D));
  return s;
}

std::pair<AdamState, PolicyParams> adam_step(const AdamState& state, const PolicyParams& theta,
                                             const Eigen::VectorXd& grad, double lr) {
  if (grad.size() != theta.values.size() || state.m.size() != grad.size() ||
      state.v.size() != grad.size())
    throw InvalidArgument("adam_step: dimension mismatch");
  if (!grad.allFinite()) throw NumericFailure("adam_step: non-finite gradient");

  AdamState next = state;
  next.step_count += 1;
  next.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  next.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, double(next.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, double(next.step_count));
  PolicyParams out = theta;
  out.values.array() +=
      lr * (next.m.array() / c1) / ((next.v.array() / c2).sqrt() + state.eps_adam);
  return {std::move(next), std::move(out)};
}

PolicyParams initial_theta(const Policy& policy, std::uint64_t seed) {
  RngStream s = RngStream(seed).child(2);
  return policy.initial_params(s);
}

double validation_value(const MeanFieldEnv& env, const Policy& policy, const PolicyParams& theta,
                        const TrainConfig& cfg, std::size_t episode) {
  std::unique_ptr<MeanFieldEnv> longer;
  const MeanFieldEnv* venv = &env;
  if (cfg.val_horizon && *cfg.val_horizon != env.horizon()) {
    longer = env.with_horizon(*cfg.val_horizon);
    venv = longer.get();
  }
  const StateDist mu0 = cfg.val_mu0 ? *cfg.val_mu0 : StateDist::uniform(env.num_states());
  if (cfg.sampled_validation)
    return sampled_value(*venv, policy, theta, mu0, cfg.val_samples,
                         RngStream(cfg.seed).child(1).child(episode));
  return exact_value(*venv, policy, theta, mu0);
}

TrainResult train(const MeanFieldEnv& env, const PolicySpec& spec, const TrainConfig& cfg,
                  const TrainHooks& hooks, std::optional<PolicyParams> theta0) {
  cfg.validate();
  if (spec.num_states != env.num_states() || spec.num_actions != env.num_actions())
    throw InvalidArgument("train: policy spec does not match the environment");
  const Policy policy(spec);
  TrainResult res;
  res.theta = theta0 ? std::move(*theta0) : initial_theta(policy, cfg.seed);
  if (res.theta.size() != policy.num_params())
    throw InvalidArgument("train: initial theta has the wrong length");

  AdamState adam = AdamState::zeros(policy.num_params());
  EstimatorOptions opts;
  opts.eps = cfg.eps;
  opts.N = cfg.N;
  opts.n = cfg.n;
  opts.mode = cfg.mode;
  opts.baseline = cfg.baseline;
  opts.threads = cfg.threads;

  const RngStream episodes = RngStream(cfg.seed).child(0);
  const auto start = std::chrono::steady_clock::now();
  double last_norm = 0.0;
  const auto max_aborts = std::size_t(cfg.max_abort_fraction * double(cfg.episodes));

  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const RngStream es = episodes.child(e);
    RngStream init_stream = es.child(0);
    const StateDist mu0 = cfg.init.sample(env.num_states(), init_stream);
    try {
      const Flow flow = compute_flow(env, policy, res.theta, mu0);
      const GradEstimate g = estimate_policy_gradient(env, policy, res.theta, flow, opts, es.child(1));
      last_norm = g.grad.norm();
      std::tie(adam, res.theta) = adam_step(adam, res.theta, g.grad, cfg.lr);
    } catch (const FlowDegeneracy& err) {
      ++res.aborted;
      spdlog::warn("episode {} aborted: {}", e, err.what());
      if (res.aborted > max_aborts) {
        std::ostringstream os;
        os << "train: " << res.aborted << " aborted episodes exceed "
           << cfg.max_abort_fraction * 100.0 << "% of " << cfg.episodes;
        throw NumericFailure(os.str(), long(e));
      }
    } catch (const NumericFailure& err) {
      std::ostringstream os;
      os << "episode " << e << ": " << err.what();
      throw NumericFailure(os.str(), long(e));
    }

    const std::size_t done = e + 1;
    if (done % cfg.val_every == 0) {
      MetricsRow row;
      row.episode = done;
      try {
        row.val_reward = validation_value(env, policy, res.theta, cfg, done);
      } catch (const FlowDegeneracy& err) {
        spdlog::warn("validation at episode {} failed: {}", done, err.what());
        row.val_reward = std::numeric_limits<double>::quiet_NaN();
      }
      row.grad_norm = last_norm;
      row.aborted = res.aborted;
      if (cfg.record_wall_time)
        row.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      spdlog::debug("episode {} val_reward {:.6f} grad_norm {:.4g}", done, row.val_reward,
                    row.grad_norm);
      res.metrics.push_back(row);
      if (hooks.on_metrics) hooks.on_metrics(row);
    }
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && hooks.on_checkpoint)
      hooks.on_checkpoint(done, res.theta);
  }
  return res;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << kMetricsHeader << '\n';
  char buf[160];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%zu,%.3f\n", r.episode, r.val_reward,
                  r.grad_norm, r.aborted, r.wall_time_s);
    out << buf;
  }
}

}  // namespace mfpg
