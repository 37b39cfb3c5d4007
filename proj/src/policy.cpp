#include "mfpg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace mfpg {

namespace {

struct Scratch {
  std::vector<double> u, h, p, delta;
  void reserve(std::size_t in, std::size_t hidden, std::size_t actions) {
    if (u.size() < in) u.resize(in);
    if (h.size() < hidden) h.resize(hidden);
    if (p.size() < actions) p.resize(actions);
    if (delta.size() < actions) delta.resize(actions);
  }
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

// In-place row softmax with max subtraction.
void softmax_inplace(double* z, std::size_t n) {
  double m = z[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = std::exp(z[i] - m);
    s += z[i];
  }
  for (std::size_t i = 0; i < n; ++i) z[i] /= s;
}

}  // namespace

std::string to_string(PolicyKind kind) { return kind == PolicyKind::tabular ? "tabular" : "mlp"; }

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "tabular") return PolicyKind::tabular;
  if (s == "mlp") return PolicyKind::mlp;
  throw InvalidArgument("unknown policy kind '" + s + "' (expected tabular or mlp)");
}

std::size_t PolicySpec::input_dim() const {
  return (include_t ? 1u : 0u) + (include_mu ? num_states : 0u);
}

std::size_t PolicySpec::num_params() const {
  const std::size_t out = num_states * num_actions;
  if (kind == PolicyKind::tabular) return out;
  return hidden * input_dim() + hidden + out * hidden + out;
}

Policy::Policy(PolicySpec spec) : spec_(spec), num_params_(spec.num_params()) {
  if (spec_.num_states == 0 || spec_.num_actions == 0)
    throw InvalidArgument("Policy: num_states and num_actions must be >= 1");
  if (spec_.kind == PolicyKind::mlp) {
    if (spec_.hidden == 0) throw InvalidArgument("Policy: mlp hidden width must be >= 1");
    if (spec_.time_horizon < 1) throw InvalidArgument("Policy: time_horizon must be >= 1");
    const std::size_t in = spec_.input_dim();
    const std::size_t out = spec_.num_states * spec_.num_actions;
    off_.w1 = 0;
    off_.b1 = spec_.hidden * in;
    off_.w2 = off_.b1 + spec_.hidden;
    off_.b2 = off_.w2 + out * spec_.hidden;
  }
}

PolicyParams Policy::zero_params() const {
  return PolicyParams{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params_))};
}

PolicyParams Policy::initial_params(RngStream& stream) const {
  PolicyParams theta = zero_params();
  if (spec_.kind == PolicyKind::tabular) return theta;
  const std::size_t in = spec_.input_dim();
  const std::size_t out = spec_.num_states * spec_.num_actions;
  const double bound1 = in > 0 ? 1.0 / std::sqrt(double(in)) : 0.0;
  const double bound2 = 1.0 / std::sqrt(double(spec_.hidden));
  for (std::size_t i = 0; i < spec_.hidden * in; ++i)
    theta.values[Eigen::Index(off_.w1 + i)] = bound1 * (2.0 * stream.uniform() - 1.0);
  for (std::size_t i = 0; i < out * spec_.hidden; ++i)
    theta.values[Eigen::Index(off_.w2 + i)] = bound2 * (2.0 * stream.uniform() - 1.0);
  return theta;
}

void Policy::check_theta(const PolicyParams& theta) const {
  if (theta.size() != num_params_) {
    std::ostringstream os;
    os << "Policy: theta has " << theta.size() << " entries, expected " << num_params_;
    throw InvalidArgument(os.str());
  }
}

void Policy::fill_input(int t, std::span<const double> mu, double* u) const {
  std::size_t k = 0;
  if (spec_.include_t) {
    const int clamped = std::clamp(t, 0, spec_.time_horizon - 1);
    u[k++] = double(clamped) / double(spec_.time_horizon);
  }
  if (spec_.include_mu)
    for (std::size_t i = 0; i < spec_.num_states; ++i) u[k++] = mu[i];
}

void Policy::hidden_layer(const double* theta, const double* u, double* h) const {
  const std::size_t in = spec_.input_dim();
  const double* w1 = theta + off_.w1;
  const double* b1 = theta + off_.b1;
  for (std::size_t j = 0; j < spec_.hidden; ++j) {
    double s = b1[j];
    const double* row = w1 + j * in;
    for (std::size_t i = 0; i < in; ++i) s += row[i] * u[i];
    h[j] = std::tanh(s);
  }
}

void Policy::row_logits(const double* theta, const double* h, std::size_t x, double* z) const {
  const std::size_t A = spec_.num_actions;
  const std::size_t H = spec_.hidden;
  const double* w2 = theta + off_.w2;
  const double* b2 = theta + off_.b2;
  for (std::size_t a = 0; a < A; ++a) {
    const std::size_t r = x * A + a;
    double s = b2[r];
    const double* row = w2 + r * H;
    for (std::size_t j = 0; j < H; ++j) s += row[j] * h[j];
    z[a] = s;
  }
}

void Policy::row_probs(const double* theta, int t, std::size_t x, std::span<const double> mu,
                       double* probs, double* u, double* h) const {
  const std::size_t A = spec_.num_actions;
  if (spec_.kind == PolicyKind::tabular) {
    std::copy_n(theta + x * A, A, probs);
  } else {
    fill_input(t, mu, u);
    hidden_layer(theta, u, h);
    row_logits(theta, h, x, probs);
  }
  softmax_inplace(probs, A);
}

void Policy::backprop_row(const double* theta, std::size_t x, const double* delta,
                          const double* u, const double* h, double* acc) const {
  const std::size_t A = spec_.num_actions;
  if (spec_.kind == PolicyKind::tabular) {
    for (std::size_t a = 0; a < A; ++a) acc[x * A + a] += delta[a];
    return;
  }
  const std::size_t H = spec_.hidden;
  const std::size_t in = spec_.input_dim();
  const double* w2 = theta + off_.w2;
  double* g_w1 = acc + off_.w1;
  double* g_b1 = acc + off_.b1;
  double* g_w2 = acc + off_.w2;
  double* g_b2 = acc + off_.b2;
  for (std::size_t a = 0; a < A; ++a) {
    const std::size_t r = x * A + a;
    g_b2[r] += delta[a];
    double* grow = g_w2 + r * H;
    for (std::size_t j = 0; j < H; ++j) grow[j] += delta[a] * h[j];
  }
  for (std::size_t j = 0; j < H; ++j) {
    double dh = 0.0;
    for (std::size_t a = 0; a < A; ++a) dh += delta[a] * w2[(x * A + a) * H + j];
    const double dpre = dh * (1.0 - h[j] * h[j]);
    g_b1[j] += dpre;
    double* grow = g_w1 + j * in;
    for (std::size_t i = 0; i < in; ++i) grow[i] += dpre * u[i];
  }
}

void Policy::action_probs(const PolicyParams& theta, int t, std::size_t x,
                          std::span<const double> mu, std::span<double> out) const {
  check_theta(theta);
  if (x >= spec_.num_states) throw InvalidArgument("Policy: state out of range");
  Scratch& s = scratch();
  s.reserve(spec_.input_dim(), spec_.hidden, spec_.num_actions);
  row_probs(theta.values.data(), t, x, mu, out.data(), s.u.data(), s.h.data());
}

StateDist Policy::action_probs(const PolicyParams& theta, int t, std::size_t x,
                               const StateDist& mu) const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(spec_.num_actions));
  action_probs(theta, t, x, mu.span(), {p.data(), spec_.num_actions});
  return StateDist(std::move(p));
}

void Policy::action_table(const PolicyParams& theta, int t, std::span<const double> mu,
                          Eigen::MatrixXd& out) const {
  check_theta(theta);
  const std::size_t d = spec_.num_states;
  const std::size_t A = spec_.num_actions;
  out.resize(Eigen::Index(d), Eigen::Index(A));
  Scratch& s = scratch();
  s.reserve(spec_.input_dim(), spec_.hidden, A);
  const double* th = theta.values.data();
  if (spec_.kind == PolicyKind::mlp) {
    fill_input(t, mu, s.u.data());
    hidden_layer(th, s.u.data(), s.h.data());
  }
  for (std::size_t x = 0; x < d; ++x) {
    if (spec_.kind == PolicyKind::tabular)
      std::copy_n(th + x * A, A, s.p.data());
    else
      row_logits(th, s.h.data(), x, s.p.data());
    softmax_inplace(s.p.data(), A);
    for (std::size_t a = 0; a < A; ++a) out(Eigen::Index(x), Eigen::Index(a)) = s.p[a];
  }
}

std::size_t Policy::sample_action(const PolicyParams& theta, int t, std::size_t x,
                                  std::span<const double> mu, RngStream& stream) const {
  check_theta(theta);
  Scratch& s = scratch();
  s.reserve(spec_.input_dim(), spec_.hidden, spec_.num_actions);
  row_probs(theta.values.data(), t, x, mu, s.p.data(), s.u.data(), s.h.data());
  return stream.categorical({s.p.data(), spec_.num_actions});
}

void Policy::add_grad_log_prob(const PolicyParams& theta, int t, std::size_t x,
                               std::span<const double> mu, std::size_t a, double weight,
                               std::span<double> acc) const {
  check_theta(theta);
  if (a >= spec_.num_actions) throw InvalidArgument("Policy: action out of range");
  const std::size_t A = spec_.num_actions;
  Scratch& s = scratch();
  s.reserve(spec_.input_dim(), spec_.hidden, A);
  row_probs(theta.values.data(), t, x, mu, s.p.data(), s.u.data(), s.h.data());
  for (std::size_t b = 0; b < A; ++b) s.delta[b] = weight * ((b == a ? 1.0 : 0.0) - s.p[b]);
  backprop_row(theta.values.data(), x, s.delta.data(), s.u.data(), s.h.data(), acc.data());
}

Eigen::VectorXd Policy::grad_log_prob(const PolicyParams& theta, int t, std::size_t x,
                                      std::span<const double> mu, std::size_t a) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(Eigen::Index(num_params_));
  add_grad_log_prob(theta, t, x, mu, a, 1.0, {g.data(), num_params_});
  return g;
}

std::size_t Policy::sample_and_score(const PolicyParams& theta, int t, std::size_t x,
                                     std::span<const double> mu, double u, double weight,
                                     std::span<double> acc) const {
  check_theta(theta);
  const std::size_t A = spec_.num_actions;
  Scratch& s = scratch();
  s.reserve(spec_.input_dim(), spec_.hidden, A);
  row_probs(theta.values.data(), t, x, mu, s.p.data(), s.u.data(), s.h.data());
  const std::size_t a = categorical_from_uniform({s.p.data(), A}, u);
  for (std::size_t b = 0; b < A; ++b) s.delta[b] = weight * ((b == a ? 1.0 : 0.0) - s.p[b]);
  backprop_row(theta.values.data(), x, s.delta.data(), s.u.data(), s.h.data(), acc.data());
  return a;
}

nlohmann::json checkpoint_to_json(const PolicySpec& spec, const PolicyParams& theta) {
  nlohmann::json doc;
  doc["kind"] = to_string(spec.kind);
  doc["dims"] = {{"input", spec.input_dim()},
                 {"params", spec.num_params()},
                 {"include_t", spec.include_t},
                 {"include_mu", spec.include_mu},
                 {"time_horizon", spec.time_horizon}};
  doc["d"] = spec.num_states;
  doc["n_actions"] = spec.num_actions;
  doc["hidden"] = spec.kind == PolicyKind::mlp ? spec.hidden : 0;
  doc["theta"] = std::vector<double>(theta.values.data(), theta.values.data() + theta.size());
  return doc;
}

std::pair<PolicySpec, PolicyParams> checkpoint_from_json(const nlohmann::json& doc) {
  try {
    PolicySpec spec;
    spec.kind = policy_kind_from_string(doc.at("kind").get<std::string>());
    spec.num_states = doc.at("d").get<std::size_t>();
    spec.num_actions = doc.at("n_actions").get<std::size_t>();
    const auto& dims = doc.at("dims");
    spec.include_t = dims.at("include_t").get<bool>();
    spec.include_mu = dims.at("include_mu").get<bool>();
    spec.time_horizon = dims.at("time_horizon").get<int>();
    if (spec.kind == PolicyKind::mlp) spec.hidden = doc.at("hidden").get<std::size_t>();
    const auto values = doc.at("theta").get<std::vector<double>>();
    if (values.size() != spec.num_params())
      throw InvalidArgument("checkpoint: theta length does not match the architecture");
    if (dims.at("params").get<std::size_t>() != values.size())
      throw InvalidArgument("checkpoint: dims.params does not match theta length");
    PolicyParams theta{Eigen::Map<const Eigen::VectorXd>(values.data(), Eigen::Index(values.size()))};
    return {spec, theta};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const PolicySpec& spec,
                     const PolicyParams& theta) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(spec, theta).dump(2) << "\n";
}

std::pair<PolicySpec, PolicyParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace mfpg
