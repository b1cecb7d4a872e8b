#pragma once

// States on the product of spheres (S^{d-1})^n.
//
// A configuration is stored as the n x d matrix X whose rows are the agent
// states. Its vectorization x = vec(X^T) is agent-major: [x_1; x_2; ...; x_n].

#include "spherecons/common.hpp"
#include "spherecons/linalg.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace spherecons {

class Configuration {
 public:
  /// Normalizes every row of `raw`. Rows with norm <= 1e-14 are rejected.
  static Configuration from_rows(Matrix raw) {
    require(raw.cols() >= 2, "configurations need ambient dimension d >= 2");
    require(raw.rows() >= 1, "configurations need at least one agent");
    for (Index i = 0; i < raw.rows(); ++i) {
      const double norm = raw.row(i).norm();
      require(std::isfinite(norm) && norm > kMinRowNorm, "row " + std::to_string(i + 1) + " is (near) zero");
      raw.row(i) /= norm;
    }
    return Configuration(std::move(raw));
  }

  /// Inverse of vec(): x holds n consecutive blocks of length d.
  static Configuration from_vec(const Vector& x, Index n, Index d) {
    require(x.size() == n * d, "vector length does not match n * d");
    Matrix rows(n, d);
    for (Index i = 0; i < n; ++i) rows.row(i) = x.segment(i * d, d).transpose();
    return from_rows(std::move(rows));
  }

  Index agents() const noexcept { return rows_.rows(); }
  Index dim() const noexcept { return rows_.cols(); }
  const Matrix& rows() const noexcept { return rows_; }
  Vector agent(Index i) const { return rows_.row(i).transpose(); }

  Vector vec() const {
    Vector x(agents() * dim());
    for (Index i = 0; i < agents(); ++i) x.segment(i * dim(), dim()) = rows_.row(i).transpose();
    return x;
  }

 private:
  explicit Configuration(Matrix unit_rows) : rows_(std::move(unit_rows)) {}
  Matrix rows_;
};

inline Configuration normalize_rows(Matrix raw) { return Configuration::from_rows(std::move(raw)); }

/// Rows i.i.d. uniform on S^{d-1} (normalized standard Gaussians).
inline Configuration random_configuration(Index n, Index d, std::uint64_t seed) {
  require(n >= 1 && d >= 2, "random_configuration needs n >= 1 and d >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix raw(n, d);
  for (Index i = 0; i < n; ++i) {
    do {
      for (Index k = 0; k < d; ++k) raw(i, k) = gauss(rng);
    } while (raw.row(i).norm() <= kMinRowNorm);
  }
  return Configuration::from_rows(std::move(raw));
}

/// Every agent at `xbar`. Inputs within 1e-9 of unit norm are renormalized.
inline Configuration consensus_configuration(Index n, const Vector& xbar) {
  require(n >= 1, "consensus_configuration needs n >= 1");
  require(std::abs(xbar.norm() - 1.0) <= 1e-9, "consensus point must be a unit vector");
  Matrix rows(n, xbar.size());
  for (Index i = 0; i < n; ++i) rows.row(i) = xbar.transpose();
  return Configuration::from_rows(std::move(rows));
}

inline Index numerical_rank(const Configuration& c, double tol = kRankTol) {
  return numerical_rank(c.rows(), tol);
}

enum class ConfigurationClass { Consensus, AntipodalRankOne, HigherRank };

inline const char* to_string(ConfigurationClass k) {
  switch (k) {
    case ConfigurationClass::Consensus: return "consensus";
    case ConfigurationClass::AntipodalRankOne: return "antipodal";
    case ConfigurationClass::HigherRank: return "higher-rank";
  }
  return "?";
}

struct Classification {
  ConfigurationClass kind;
  Index rank;
  friend bool operator==(const Classification&, const Classification&) = default;
};

/// Consensus iff every pairwise dot product is >= 1 - consensus_tol; otherwise
/// split by numerical rank.
inline Classification classify_configuration(const Configuration& c, double consensus_tol = kConsensusTol,
                                             double rank_tol = kRankTol) {
  const Matrix gram = c.rows() * c.rows().transpose();
  if (gram.minCoeff() >= 1.0 - consensus_tol) return {ConfigurationClass::Consensus, 1};
  const Index rank = numerical_rank(c, rank_tol);
  if (rank == 1) return {ConfigurationClass::AntipodalRankOne, 1};
  return {ConfigurationClass::HigherRank, rank};
}

/// Orthonormal tangent frames R_{x_i} (d x (d-1)), one per agent.
class TangentBasis {
 public:
  explicit TangentBasis(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {
    require(!blocks_.empty(), "tangent basis needs at least one block");
    for (const Matrix& b : blocks_)
      require(b.rows() == blocks_.front().rows() && b.cols() == b.rows() - 1, "tangent block must be d x (d-1)");
  }

  Index agents() const noexcept { return static_cast<Index>(blocks_.size()); }
  Index dim() const noexcept { return blocks_.front().rows(); }
  const Matrix& block(Index i) const { return blocks_[static_cast<std::size_t>(i)]; }

  /// Block-diagonal R_x of size nd x n(d-1).
  Matrix dense() const {
    const Index n = agents(), d = dim();
    Matrix r = Matrix::Zero(n * d, n * (d - 1));
    for (Index i = 0; i < n; ++i) r.block(i * d, i * (d - 1), d, d - 1) = block(i);
    return r;
  }

 private:
  std::vector<Matrix> blocks_;
};

/// Orthonormal complement of the unit vector `x`.
///
/// d = 2: the single column [[0,1],[-1,0]] x.
/// d >= 3: columns 2..d of the Householder reflection sending e_1 to x.
inline Matrix tangent_frame(const Vector& x) {
  const Index d = x.size();
  if (d == 2) {
    Matrix r(2, 1);
    r << x(1), -x(0);
    return r;
  }
  // u = e_1 - x with the first component computed without cancellation.
  Vector u = -x;
  const double tail = x.tail(d - 1).squaredNorm();
  u(0) = x(0) > 0.0 ? tail / (1.0 + x(0)) : 1.0 - x(0);
  const double uu = u.squaredNorm();
  Matrix h = Matrix::Identity(d, d);
  if (uu > 0.0) h -= (2.0 / uu) * u * u.transpose();
  return h.rightCols(d - 1);
}

inline TangentBasis tangent_basis(const Configuration& c) {
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(c.agents()));
  for (Index i = 0; i < c.agents(); ++i) blocks.push_back(tangent_frame(c.agent(i)));
  return TangentBasis(std::move(blocks));
}

/// Block-diagonal P_x with blocks I - x_i x_i^T.
inline Matrix projection_matrix(const Configuration& c) {
  const Index n = c.agents(), d = c.dim();
  Matrix p = Matrix::Zero(n * d, n * d);
  for (Index i = 0; i < n; ++i) {
    const Vector xi = c.agent(i);
    p.block(i * d, i * d, d, d) = Matrix::Identity(d, d) - xi * xi.transpose();
  }
  return p;
}

}  // namespace spherecons
