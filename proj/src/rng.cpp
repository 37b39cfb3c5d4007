#include "mfpg/rng.hpp"

#include "mfpg/core.hpp"

#include <cmath>
#include <numbers>

namespace mfpg {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

RngStream::RngStream(std::uint64_t master_seed)
    : seed_(master_seed), key_(splitmix64(master_seed)) {}

RngStream::RngStream(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

RngStream RngStream::child(std::uint64_t index) const {
  if (depth_ == kMaxDepth) throw InvalidArgument("RngStream: path too deep");
  RngStream c(seed_, splitmix64(key_ ^ splitmix64(index + 0x632BE59BD9B4E019ull)));
  c.path_ = path_;
  c.path_[depth_] = index;
  c.depth_ = depth_ + 1;
  return c;
}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(counter_),
                                            static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(key_),
                                            static_cast<std::uint32_t>(key_ >> 32)};
  block_ = philox4x32(ctr, key);
  ++counter_;
  block_pos_ = 0;
}

std::uint32_t RngStream::next_u32() {
  if (block_pos_ == 4) refill();
  return block_[block_pos_++];
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(angle);
  has_cached_normal_ = true;
  return r * std::cos(angle);
}

std::size_t RngStream::categorical(std::span<const double> probs) {
  return categorical_from_uniform(probs, uniform());
}

std::size_t categorical_from_uniform(std::span<const double> probs, double u) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double target = u * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (target < acc) return i;
  }
  // Rounding left target at the very top; return the last state with positive mass.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

Eigen::MatrixXd sample_gaussians(RngStream& stream, std::size_t count, std::size_t dim) {
  if (count == 0 || dim == 0) throw InvalidArgument("sample_gaussians: count and dim must be >= 1");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = stream.normal();
  return out;
}

}  // namespace mfpg
