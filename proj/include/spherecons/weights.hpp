#pragma once

#include "spherecons/common.hpp"
#include "spherecons/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace spherecons {

/// Non-negative n x n matrix whose off-diagonal positivity pattern is exactly
/// the edge set of its graph.
class WeightMatrix {
 public:
  WeightMatrix(Matrix entries, DirectedGraph graph) : entries_(std::move(entries)), graph_(std::move(graph)) {
    const Index n = graph_.size();
    require(entries_.rows() == n && entries_.cols() == n, "weight matrix must be n x n for its graph");
    require(entries_.allFinite(), "weight matrix has non-finite entries");
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const double a = entries_(i, j);
        require(a >= 0.0, "weight matrix entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                              ") is negative");
        if (i != j)
          require((a > 0.0) == graph_.has_edge(i, j),
                  "weight (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") does not match graph structure");
      }
  }

  /// Reads the graph off the zero pattern of `entries`.
  static WeightMatrix from_entries(const Matrix& entries) {
    require(entries.rows() == entries.cols() && entries.rows() >= 1, "weight matrix must be square");
    std::vector<Edge> edges;
    for (Index i = 0; i < entries.rows(); ++i)
      for (Index j = 0; j < entries.cols(); ++j)
        if (i != j && entries(i, j) > 0.0) edges.push_back({i, j});
    return WeightMatrix(entries, DirectedGraph(entries.rows(), edges));
  }

  const Matrix& entries() const noexcept { return entries_; }
  const DirectedGraph& graph() const noexcept { return graph_; }
  Index size() const noexcept { return graph_.size(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

  /// Sum of the off-diagonal entries of row i.
  double off_diagonal_sum(Index i) const { return entries_.row(i).sum() - entries_(i, i); }

  bool is_symmetric() const { return entries_ == entries_.transpose(); }

 private:
  Matrix entries_;
  DirectedGraph graph_;
};

/// M_A = alpha I - A with alpha above every row sum of A. Not a weight matrix:
/// its off-diagonal entries are non-positive.
class DescentMatrix {
 public:
  DescentMatrix(const WeightMatrix& source, double alpha) : source_(source), alpha_(alpha) {
    const double max_row = source.entries().rowwise().sum().maxCoeff();
    require(alpha > max_row, "alpha must exceed the largest row sum of A");
    entries_ = alpha * Matrix::Identity(source.size(), source.size()) - source.entries();
  }

  const Matrix& entries() const noexcept { return entries_; }
  double alpha() const noexcept { return alpha_; }
  const WeightMatrix& source() const noexcept { return source_; }
  Index size() const noexcept { return source_.size(); }

 private:
  WeightMatrix source_;
  double alpha_;
  Matrix entries_;
};

inline bool is_strictly_diagonally_dominant(const Matrix& a) {
  for (Index i = 0; i < a.rows(); ++i) {
    const double off = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
    if (!(a(i, i) > off)) return false;
  }
  return true;
}

inline bool is_strictly_diagonally_dominant(const WeightMatrix& a) {
  return is_strictly_diagonally_dominant(a.entries());
}

/// a_ii > sqrt(2) * sum_{j != i} a_ij for every row.
inline bool satisfies_sqrt2_condition(const WeightMatrix& a) {
  for (Index i = 0; i < a.size(); ++i)
    if (!(a(i, i) > std::sqrt(2.0) * a.off_diagonal_sum(i))) return false;
  return true;
}

/// Law of the off-diagonal weights on edges.
struct WeightLaw {
  double lower = 0.0;  // draws are uniform on (lower, 1]
  bool mirror = false; // symmetric case: copy the upper draw instead of averaging
};

/// Random strictly diagonally dominant weight matrix for `g`.
///
/// Off-diagonal entries on edges are uniform on (law.lower, 1]; in the symmetric
/// case the (i,j) and (j,i) draws are averaged, or the i < j draw is mirrored.
/// The diagonal is (1 + margin) times the off-diagonal row sum, or 1 for a row
/// without out-neighbours.
inline WeightMatrix sample_sdd(const DirectedGraph& g, double margin, bool symmetric, std::uint64_t seed,
                               const WeightLaw& law = {}) {
  require(margin > 0.0, "dominance margin must be positive");
  require(law.lower >= 0.0 && law.lower < 1.0, "weight lower bound must lie in [0,1)");
  require(!symmetric || is_symmetric(g), "symmetric weights requested on an asymmetric graph");
  const Index n = g.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix draws(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) draws(i, j) = 1.0 - (1.0 - law.lower) * unit(rng);

  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (!g.has_edge(i, j)) continue;
      if (!symmetric) a(i, j) = draws(i, j);
      else if (law.mirror) a(i, j) = draws(std::min(i, j), std::max(i, j));
      else a(i, j) = 0.5 * (draws(i, j) + draws(j, i));
    }
  for (Index i = 0; i < n; ++i) {
    const double off = a.row(i).sum();
    a(i, i) = off > 0.0 ? (1.0 + margin) * off : 1.0;
  }
  return WeightMatrix(std::move(a), g);
}

/// alpha = (1 + slack) * max row sum; entries alpha I - A.
inline DescentMatrix descent_matrix(const WeightMatrix& a, double slack = kDefaultSlack) {
  require(slack > 0.0, "slack must be positive");
  const double max_row = a.entries().rowwise().sum().maxCoeff();
  return DescentMatrix(a, (1.0 + slack) * max_row);
}

/// Divides each row by its diagonal entry. Leaves the iteration map unchanged.
inline WeightMatrix left_scale_normalize(const WeightMatrix& a) {
  Matrix out = a.entries();
  for (Index i = 0; i < a.size(); ++i) {
    const double diag = a(i, i);
    require(diag > 0.0, "left_scale_normalize: zero diagonal entry in row " + std::to_string(i + 1));
    out.row(i) /= diag;
    out(i, i) = 1.0;
  }
  return WeightMatrix(std::move(out), a.graph());
}

}  // namespace spherecons
