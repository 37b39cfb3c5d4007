#include "mfpg/env.hpp"

namespace mfpg {

void MeanFieldEnv::transition_matrix(std::size_t a, std::span<const double> mu,
                                     Eigen::MatrixXd& out) const {
  const auto d = static_cast<Eigen::Index>(num_states());
  out.resize(d, d);
  Eigen::VectorXd row(d);
  for (Eigen::Index x = 0; x < d; ++x) {
    transition(static_cast<std::size_t>(x), a, mu, {row.data(), static_cast<std::size_t>(d)});
    out.row(x) = row.transpose();
  }
}

FunctionEnv::FunctionEnv(std::string name, std::size_t d, std::size_t n_actions, int T,
                         TransitionFn transition, RewardFn reward, TerminalFn terminal,
                         double bound)
    : name_(std::move(name)),
      d_(d),
      n_actions_(n_actions),
      T_(T),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      terminal_(std::move(terminal)),
      bound_(bound) {
  if (d_ == 0 || n_actions_ == 0) throw InvalidArgument("FunctionEnv: empty state or action set");
  if (T_ < 0) throw InvalidArgument("FunctionEnv: negative horizon");
}

std::unique_ptr<MeanFieldEnv> FunctionEnv::with_horizon(int T) const {
  auto copy = std::make_unique<FunctionEnv>(*this);
  if (T < 0) throw InvalidArgument("FunctionEnv: negative horizon");
  copy->T_ = T;
  return copy;
}

}  // namespace mfpg
