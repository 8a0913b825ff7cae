#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace oplab {

// Fixed stream identifiers so that components never share or reorder random
// draws. A run derives one stream per (master seed, id) pair; adding a new
// consumer means adding a new id, never reusing an existing one.
namespace stream_id {
inline constexpr std::uint64_t kEnv = 1;
inline constexpr std::uint64_t kEvalEnv = 2;
inline constexpr std::uint64_t kExplore = 3;
inline constexpr std::uint64_t kPolicyRollout = 4;
inline constexpr std::uint64_t kUpdateNoise = 5;
inline constexpr std::uint64_t kBufferSample = 6;
inline constexpr std::uint64_t kReset = 7;
inline constexpr std::uint64_t kValidation = 8;
inline constexpr std::uint64_t kReference = 9;
// Network initialization streams: one per network role, shared across
// algorithms so that e.g. the reward critic of C-OPAC2 and the critic of
// OPAC2 draw identical initial weights under the same master seed.
inline constexpr std::uint64_t kInitPolicy = 100;
inline constexpr std::uint64_t kInitQReward1 = 101;
inline constexpr std::uint64_t kInitQReward2 = 102;
inline constexpr std::uint64_t kInitQCost1 = 103;
inline constexpr std::uint64_t kInitQCost2 = 104;
inline constexpr std::uint64_t kInitVReward = 105;
inline constexpr std::uint64_t kInitVCost = 106;
}  // namespace stream_id

// Deterministic random stream. A (master seed, stream id) pair is mixed by
// splitmix64 into the mt19937-64 seed, so streams are independent and a run
// is reproducible bit-for-bit from its master seed alone. All floating-point
// draws are produced by explicit transforms (no std::*_distribution), which
// keeps sequences identical across standard-library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream = 0)
      : engine_(mix(master_seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform index in [0, n) without modulo bias.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t limit =
        UINT64_MAX - UINT64_MAX % static_cast<std::uint64_t>(n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % n);
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal();
    return m;
  }

  Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols,
                                 double lo, double hi) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(lo, hi);
    return m;
  }

  Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t mix(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t state = master;
    std::uint64_t a = splitmix64(state);
    state ^= stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = splitmix64(state);
    return a ^ (b + 0x9e3779b97f4a7c15ULL);
  }

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace oplab
