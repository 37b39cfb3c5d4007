#include "mfpg/bench.hpp"

#include <cmath>
#include <sstream>

namespace mfpg {

namespace {

class TwoStateEnv final : public MeanFieldEnv {
 public:
  explicit TwoStateEnv(const TwoStateParams& p) : p_(p) {}

  std::string name() const override { return "two_state"; }
  std::size_t num_states() const override { return 2; }
  std::size_t num_actions() const override { return 2; }
  int horizon() const override { return p_.T; }

  void transition(std::size_t x, std::size_t a, std::span<const double>,
                  std::span<double> out) const override {
    const double flip = a == kMove ? (x == 0 ? p_.lambda0 : p_.lambda1) : 0.0;
    out[x] = 1.0 - flip;
    out[1 - x] = flip;
  }

  double reward(int, std::size_t x, std::size_t, std::span<const double> mu) const override {
    return state_reward(x, mu);
  }
  double terminal_reward(std::size_t x, std::span<const double> mu) const override {
    return state_reward(x, mu);
  }
  double reward_bound() const override { return 2.0 + p_.lam; }

  std::unique_ptr<MeanFieldEnv> with_horizon(int T) const override {
    TwoStateParams q = p_;
    q.T = T;
    return std::make_unique<TwoStateEnv>(q);
  }

 private:
  // W1 on {0, 1} with unit distance is |mu(1) - B(1)|, and B(1) = 1 - p.
  double state_reward(std::size_t x, std::span<const double> mu) const {
    const double m1 = mu[1];
    return (x == 1 ? 1.0 : 0.0) - m1 * m1 - p_.lam * std::abs(m1 - (1.0 - p_.p));
  }

  TwoStateParams p_;
};

class CyberEnv final : public MeanFieldEnv {
 public:
  CyberEnv(const CyberParams& p, int T) : p_(p), T_(T) {}

  std::string name() const override { return "cyber"; }
  std::size_t num_states() const override { return 4; }
  std::size_t num_actions() const override { return 2; }
  int horizon() const override { return T_; }

  void transition(std::size_t x, std::size_t a, std::span<const double> mu,
                  std::span<double> out) const override {
    const Eigen::MatrixXd P = kernel(a, mu);
    for (Eigen::Index j = 0; j < 4; ++j) out[std::size_t(j)] = P(Eigen::Index(x), j);
  }
  void transition_matrix(std::size_t a, std::span<const double> mu,
                         Eigen::MatrixXd& out) const override {
    out = kernel(a, mu);
  }

  double reward(int t, std::size_t x, std::size_t, std::span<const double>) const override {
    return -std::pow(p_.gamma, t) * p_.dt * cost(x);
  }
  double terminal_reward(std::size_t x, std::span<const double>) const override {
    return -std::pow(p_.gamma, T_) * p_.dt * cost(x);
  }
  double reward_bound() const override { return p_.dt * (p_.k_D + p_.k_I); }

  std::unique_ptr<MeanFieldEnv> with_horizon(int T) const override {
    return std::make_unique<CyberEnv>(p_, T);
  }

 private:
  Eigen::MatrixXd kernel(std::size_t a, std::span<const double> mu) const {
    const Eigen::MatrixXd Q = cyber_generator(p_, mu, a);
    return expm(p_.dt * Q);
  }
  double cost(std::size_t x) const {
    const bool defended = x == kDI || x == kDS;
    const bool infected = x == kDI || x == kUI;
    return (defended ? p_.k_D : 0.0) + (infected ? p_.k_I : 0.0);
  }

  CyberParams p_;
  int T_;
};

class PlanEnv final : public MeanFieldEnv {
 public:
  explicit PlanEnv(const PlanParams& p) : p_(p) {}

  std::string name() const override { return "plan"; }
  std::size_t num_states() const override { return p_.n_states; }
  std::size_t num_actions() const override { return 3; }
  int horizon() const override { return p_.T; }

  void transition(std::size_t x, std::size_t a, std::span<const double>,
                  std::span<double> out) const override {
    const std::size_t n = p_.n_states;
    std::fill(out.begin(), out.begin() + std::ptrdiff_t(n), 0.0);
    out[(x + n + a - 1) % n] = 1.0;
  }

  double reward(int, std::size_t, std::size_t a, std::span<const double> mu) const override {
    return -p_.move_cost * (a == 1 ? 0.0 : 1.0) - plan_target_gap(p_, mu);
  }
  double terminal_reward(std::size_t, std::span<const double> mu) const override {
    return -plan_target_gap(p_, mu);
  }
  double reward_bound() const override { return p_.move_cost + 2.0; }

  std::unique_ptr<MeanFieldEnv> with_horizon(int T) const override {
    PlanParams q = p_;
    q.T = T;
    return std::make_unique<PlanEnv>(q);
  }

 private:
  PlanParams p_;
};

}  // namespace

std::unique_ptr<MeanFieldEnv> two_state_env(const TwoStateParams& params) {
  const auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(params.lambda0) || !in_unit(params.lambda1))
    throw InvalidArgument("two_state: lambda0 and lambda1 must lie in (0, 1)");
  if (!(1.0 - params.lambda0 <= params.p && params.p <= params.lambda1)) {
    std::ostringstream os;
    os << "two_state: need 1 - lambda0 <= p <= lambda1, got p=" << params.p;
    throw InvalidArgument(os.str());
  }
  if (params.lam < 0.0) throw InvalidArgument("two_state: lam must be non-negative");
  if (params.T < 0) throw InvalidArgument("two_state: negative horizon");
  return std::make_unique<TwoStateEnv>(params);
}

StateDist two_state_target(const TwoStateParams& params) { return StateDist{params.p, 1.0 - params.p}; }

Eigen::MatrixXd two_state_optimal_policy(const TwoStateParams& params) {
  two_state_env(params);  // validates
  Eigen::MatrixXd pi(2, 2);
  const double mv0 = (1.0 - params.p) / params.lambda0;
  const double mv1 = params.p / params.lambda1;
  pi << 1.0 - mv0, mv0, 1.0 - mv1, mv1;
  return pi;
}

PolicyParams tabular_params_from_probs(const Eigen::MatrixXd& probs) {
  PolicyParams theta{Eigen::VectorXd(probs.size())};
  Eigen::Index k = 0;
  for (Eigen::Index x = 0; x < probs.rows(); ++x)
    for (Eigen::Index a = 0; a < probs.cols(); ++a)
      theta.values[k++] = std::log(std::max(probs(x, a), 1e-12));
  return theta;
}

Eigen::Matrix4d cyber_generator(const CyberParams& p, std::span<const double> mu, std::size_t a) {
  const double switch_rate = p.lambda_rate * double(a);
  const double ds_to_di = p.v_H * p.q_inf_D + p.beta_DD * mu[kDI] + p.beta_UD * mu[kUI];
  const double us_to_ui = p.v_H * p.q_inf_U + p.beta_UU * mu[kUI] + p.beta_DU * mu[kDI];
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Q(kDI, kDS) = p.q_rec_D;
  Q(kDI, kUI) = switch_rate;
  Q(kDS, kDI) = ds_to_di;
  Q(kDS, kUS) = switch_rate;
  Q(kUI, kDI) = switch_rate;
  Q(kUI, kUS) = p.q_rec_U;
  Q(kUS, kDS) = switch_rate;
  Q(kUS, kUI) = us_to_ui;
  for (Eigen::Index i = 0; i < 4; ++i) Q(i, i) = -Q.row(i).sum();
  return Q;
}

std::unique_ptr<MeanFieldEnv> cyber_env(const CyberParams& params) {
  const double rates[] = {params.beta_UU, params.beta_UD, params.beta_DU, params.beta_DD,
                          params.q_rec_D, params.q_rec_U, params.q_inf_D, params.q_inf_U,
                          params.v_H,     params.lambda_rate, params.k_D, params.k_I};
  for (double r : rates)
    if (!(r >= 0.0)) throw InvalidArgument("cyber: rates and costs must be non-negative");
  if (!(params.dt >= 0.0)) throw InvalidArgument("cyber: dt must be non-negative");
  if (!(params.gamma > 0.0 && params.gamma <= 1.0)) throw InvalidArgument("cyber: gamma must lie in (0, 1]");
  if (params.T_train < 1 || params.T_val < 1) throw InvalidArgument("cyber: horizons must be >= 1");
  return std::make_unique<CyberEnv>(params, params.T_train);
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw InvalidArgument("expm: matrix must be square");
  if (!A.allFinite()) throw NumericFailure("expm: non-finite input");
  // [6/6] Pade coefficients c_k = (2q - k)! q! / ((2q)! k! (q - k)!), q = 6.
  static constexpr std::array<double, 7> c = {1.0,
                                              1.0 / 2.0,
                                              5.0 / 44.0,
                                              1.0 / 66.0,
                                              1.0 / 792.0,
                                              1.0 / 15840.0,
                                              1.0 / 665280.0};
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = std::max(0, int(std::ceil(std::log2(norm / 0.5))));
  const Eigen::MatrixXd X = A / std::ldexp(1.0, squarings);

  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd power = I;
  Eigen::MatrixXd num = c[0] * I;
  Eigen::MatrixXd den = c[0] * I;
  for (std::size_t k = 1; k < c.size(); ++k) {
    power = power * X;
    num += c[k] * power;
    den += ((k % 2 == 0) ? c[k] : -c[k]) * power;
  }
  Eigen::MatrixXd R = den.partialPivLu().solve(num);
  for (int i = 0; i < squarings; ++i) R = R * R;
  if (!R.allFinite()) throw NumericFailure("expm: non-finite result");
  return R;
}

Eigen::VectorXd PlanParams::default_plan_target() {
  Eigen::VectorXd t(10);
  t << 0.05, 0.05, 0.2, 0.2, 0.05, 0.05, 0.05, 0.2, 0.1, 0.05;
  return t;
}

std::unique_ptr<MeanFieldEnv> plan_env(const PlanParams& params) {
  if (params.n_states < 2) throw InvalidArgument("plan: need at least 2 states");
  if (std::size_t(params.target.size()) != params.n_states)
    throw InvalidArgument("plan: target length must equal n_states");
  StateDist check(params.target);  // validates the simplex
  if (params.move_cost < 0.0) throw InvalidArgument("plan: move_cost must be non-negative");
  if (params.T < 0) throw InvalidArgument("plan: negative horizon");
  PlanParams p = params;
  p.target = check.probs();
  return std::make_unique<PlanEnv>(p);
}

double plan_target_gap(const PlanParams& params, std::span<const double> mu) {
  double s = 0.0;
  for (std::size_t x = 0; x < params.n_states; ++x) {
    const double diff = mu[x] - params.target[Eigen::Index(x)];
    s += diff * diff;
  }
  return s;
}

}  // namespace mfpg
