#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spherecons {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;

// Default numerical thresholds shared across modules.
inline constexpr double kRankTol = 1e-8;          // relative singular-value cut
inline constexpr double kConsensusTol = 1e-9;     // pairwise dot >= 1 - tol
inline constexpr double kFixedPointTol = 1e-12;   // ||f(x) - x||_2
inline constexpr long kMaxIterations = 1'000'000;
inline constexpr double kDefaultSlack = 0.25;
inline constexpr double kClassTol = 1e-7;         // "strictly larger than one"
inline constexpr double kMinRowNorm = 1e-14;

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The conical combination for one agent vanished, so its projection onto
/// the sphere is undefined.
class ZeroRowImage : public std::runtime_error {
 public:
  ZeroRowImage(Index agent, double norm)
      : std::runtime_error("row image of agent " + std::to_string(agent + 1) +
                           " has norm " + std::to_string(norm)),
        agent_(agent),
        norm_(norm) {}

  /// Zero-based index of the offending agent.
  Index agent() const noexcept { return agent_; }
  double norm() const noexcept { return norm_; }

 private:
  Index agent_;
  double norm_;
};

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of `master`:
///   splitmix64(splitmix64(master) ^ splitmix64(stream)).
/// Depends only on its two arguments, so trials can run in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0xD1B54A32D192ED03ULL));
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace spherecons
