#pragma once

#include "mfpg/core.hpp"
#include "mfpg/rng.hpp"

#include "json.hpp"

#include <filesystem>
#include <span>
#include <string>

namespace mfpg {

enum class PolicyKind { tabular, mlp };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

/// Architecture of a parametric feedback policy pi_theta(a | t, x, mu).
///
/// tabular: a static d x |A| table of logits, row-softmaxed.
/// mlp: input [t / time_horizon, mu] -> tanh(W1 u + b1) -> W2 h + b2, reshaped to a d x |A|
///      table of logits and row-softmaxed. Times at or past time_horizon are clamped to
///      time_horizon - 1 so a policy trained on a short horizon can be unrolled longer.
struct PolicySpec {
  PolicyKind kind = PolicyKind::tabular;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::size_t hidden = 32;
  bool include_t = true;
  bool include_mu = true;
  int time_horizon = 1;

  std::size_t input_dim() const;
  std::size_t num_params() const;
  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

/// Flat trainable parameter vector theta.
struct PolicyParams {
  Eigen::VectorXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  std::span<const double> span() const { return {values.data(), size()}; }
};

class Policy {
 public:
  explicit Policy(PolicySpec spec);

  const PolicySpec& spec() const { return spec_; }
  std::size_t num_params() const { return num_params_; }
  std::size_t num_states() const { return spec_.num_states; }
  std::size_t num_actions() const { return spec_.num_actions; }

  PolicyParams zero_params() const;
  /// Tabular: zeros. MLP: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  PolicyParams initial_params(RngStream& stream) const;

  /// pi(. | t, x, mu) written into out (length num_actions()).
  void action_probs(const PolicyParams& theta, int t, std::size_t x, std::span<const double> mu,
                    std::span<double> out) const;
  StateDist action_probs(const PolicyParams& theta, int t, std::size_t x,
                         const StateDist& mu) const;
  /// All rows at once: out(x, a) = pi(a | t, x, mu).
  void action_table(const PolicyParams& theta, int t, std::span<const double> mu,
                    Eigen::MatrixXd& out) const;

  std::size_t sample_action(const PolicyParams& theta, int t, std::size_t x,
                            std::span<const double> mu, RngStream& stream) const;

  /// Exact gradient of log pi(a | t, x, mu) with respect to theta.
  Eigen::VectorXd grad_log_prob(const PolicyParams& theta, int t, std::size_t x,
                                std::span<const double> mu, std::size_t a) const;
  /// acc += weight * grad log pi(a | t, x, mu).
  void add_grad_log_prob(const PolicyParams& theta, int t, std::size_t x,
                         std::span<const double> mu, std::size_t a, double weight,
                         std::span<double> acc) const;
  /// Draws a from pi(. | t, x, mu) using the uniform u and adds weight * grad log pi(a) into
  /// acc, sharing one forward pass.
  std::size_t sample_and_score(const PolicyParams& theta, int t, std::size_t x,
                               std::span<const double> mu, double u, double weight,
                               std::span<double> acc) const;

 private:
  struct Offsets {
    std::size_t w1, b1, w2, b2;
  };

  void check_theta(const PolicyParams& theta) const;
  void fill_input(int t, std::span<const double> mu, double* u) const;
  void hidden_layer(const double* theta, const double* u, double* h) const;
  void row_logits(const double* theta, const double* h, std::size_t x, double* z) const;
  /// Row x probabilities; for MLP also leaves u and h in the scratch buffers.
  void row_probs(const double* theta, int t, std::size_t x, std::span<const double> mu,
                 double* probs, double* u, double* h) const;
  void backprop_row(const double* theta, std::size_t x, const double* delta, const double* u,
                    const double* h, double* acc) const;

  PolicySpec spec_;
  std::size_t num_params_;
  Offsets off_{};
};

/// Checkpoint document: {kind, dims, d, n_actions, hidden, theta}.
nlohmann::json checkpoint_to_json(const PolicySpec& spec, const PolicyParams& theta);
std::pair<PolicySpec, PolicyParams> checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const std::filesystem::path& path, const PolicySpec& spec,
                     const PolicyParams& theta);
std::pair<PolicySpec, PolicyParams> load_checkpoint(const std::filesystem::path& path);

}  // namespace mfpg
