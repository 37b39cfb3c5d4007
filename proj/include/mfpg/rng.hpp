#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace mfpg {

/// Counter-based random stream (Philox4x32-10) keyed by (master seed, path).
///
/// A path is a short list of indices such as [episode, trajectory, time-block]. Streams with
/// different paths are independent; the same (seed, path) reproduces the same draws on every
/// platform. Children are derived with `child(i)`, which appends `i` to the path, so parallel
/// workers can each own a stream without any shared state.
class RngStream {
 public:
  static constexpr std::size_t kMaxDepth = 12;

  explicit RngStream(std::uint64_t master_seed);

  RngStream child(std::uint64_t index) const;

  std::uint64_t master_seed() const { return seed_; }
  std::span<const std::uint64_t> path() const { return {path_.data(), depth_}; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  /// Index drawn from a probability vector (need not be exactly normalized).
  std::size_t categorical(std::span<const double> probs);

 private:
  RngStream(std::uint64_t seed, std::uint64_t key);
  void refill();

  std::uint64_t seed_;
  std::array<std::uint64_t, kMaxDepth> path_{};
  std::size_t depth_ = 0;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  unsigned block_pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Raw Philox4x32-10 block function, exposed for the known-answer test.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Draws count x dim standard normals in row-major order.
Eigen::MatrixXd sample_gaussians(RngStream& stream, std::size_t count, std::size_t dim);

/// Draws an index from the categorical distribution given by a single uniform variate.
std::size_t categorical_from_uniform(std::span<const double> probs, double u);

}  // namespace mfpg
