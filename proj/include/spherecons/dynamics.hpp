#pragma once

// The projection iteration x_i <- (sum_j m_ij x_j) / ||sum_j m_ij x_j||, its
// potential, and trajectory runners.

#include "spherecons/common.hpp"
#include "spherecons/sphere_state.hpp"
#include "spherecons/weights.hpp"

#include <optional>
#include <vector>

namespace spherecons {

enum class MatrixKind { Weight, Descent };

/// A matrix the iteration can be run with: an SDD weight matrix or a descent
/// matrix alpha I - A.
class IterationMatrix {
 public:
  IterationMatrix(const WeightMatrix& a) : entries_(a.entries()), kind_(MatrixKind::Weight) {  // NOLINT
    require(is_strictly_diagonally_dominant(a), "iteration needs a strictly diagonally dominant weight matrix");
  }
  IterationMatrix(const DescentMatrix& m) : entries_(m.entries()), kind_(MatrixKind::Descent) {}  // NOLINT

  const Matrix& entries() const noexcept { return entries_; }
  MatrixKind kind() const noexcept { return kind_; }
  Index size() const noexcept { return entries_.rows(); }

 private:
  Matrix entries_;
  MatrixKind kind_;
};

namespace detail {

inline void check_shapes(const IterationMatrix& m, const Configuration& c) {
  require(m.size() == c.agents(), "matrix size does not match the number of agents");
}

/// out = D(M X) M X. Throws ZeroRowImage on a vanishing row.
inline void step(const Matrix& m, const Matrix& x, Matrix& out) {
  out.noalias() = m * x;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (!(norm > kMinRowNorm)) throw ZeroRowImage(i, norm);
    out.row(i) /= norm;
  }
}

}  // namespace detail

/// One application of the map f.
inline Configuration iterate(const IterationMatrix& m, const Configuration& c) {
  detail::check_shapes(m, c);
  Matrix out(c.agents(), c.dim());
  detail::step(m.entries(), c.rows(), out);
  return Configuration::from_rows(std::move(out));
}

/// Diagonal of D(MX): the reciprocal row norms 1 / ||[MX]_i||.
inline Vector normalization_diagonal(const IterationMatrix& m, const Configuration& c) {
  detail::check_shapes(m, c);
  const Matrix mx = m.entries() * c.rows();
  Vector out(mx.rows());
  for (Index i = 0; i < mx.rows(); ++i) {
    const double norm = mx.row(i).norm();
    if (!(norm > kMinRowNorm)) throw ZeroRowImage(i, norm);
    out(i) = 1.0 / norm;
  }
  return out;
}

/// V(X) = tr(X^T A X) = sum_ij a_ij x_i^T x_j.
inline double potential(const Matrix& a, const Configuration& c) {
  require(a.rows() == c.agents() && a.cols() == c.agents(), "matrix size does not match the number of agents");
  return (c.rows().transpose() * a * c.rows()).trace();
}

inline double potential(const WeightMatrix& a, const Configuration& c) { return potential(a.entries(), c); }

/// ||f(x) - x||_2.
inline double fixed_point_residual(const IterationMatrix& m, const Configuration& c) {
  detail::check_shapes(m, c);
  Matrix out(c.agents(), c.dim());
  detail::step(m.entries(), c.rows(), out);
  return (out - c.rows()).norm();
}

struct RunOptions {
  double fp_tol = kFixedPointTol;
  long max_iter = kMaxIterations;
  bool record_potential = false;
  /// Matrix whose potential is recorded. Defaults to the iteration matrix.
  std::optional<Matrix> potential_matrix;
};

struct TrajectoryResult {
  Configuration final;
  long iterations = 0;   // applications of f needed to reach `final`
  double residual = 0;   // ||f(final) - final||_2
  bool converged = false;
  std::vector<double> potential_history;  // V at every visited state, when recorded
};

/// Iterates until ||f(x) - x||_2 <= fp_tol or max_iter applications of f.
inline TrajectoryResult run(const IterationMatrix& m, const Configuration& c0, const RunOptions& opts = {}) {
  detail::check_shapes(m, c0);
  require(opts.fp_tol > 0.0 && opts.max_iter >= 0, "invalid run options");
  const Matrix& v_matrix = opts.potential_matrix ? *opts.potential_matrix : m.entries();
  require(v_matrix.rows() == m.size() && v_matrix.cols() == m.size(), "potential matrix has the wrong size");

  Matrix x = c0.rows();
  Matrix y(x.rows(), x.cols());
  std::vector<double> history;
  for (long k = 0;; ++k) {
    if (opts.record_potential) history.push_back((x.transpose() * v_matrix * x).trace());
    detail::step(m.entries(), x, y);
    const double r = (y - x).norm();
    if (r <= opts.fp_tol || k == opts.max_iter)
      return TrajectoryResult{Configuration::from_rows(std::move(x)), k, r, r <= opts.fp_tol, std::move(history)};
    x.swap(y);
  }
}

/// The states x(0), ..., x(steps), stopping early at a fixed point.
inline std::vector<Configuration> collect_trajectory(const IterationMatrix& m, const Configuration& c0, long steps,
                                                     double fp_tol = kFixedPointTol) {
  std::vector<Configuration> states{c0};
  for (long k = 0; k < steps; ++k) {
    Configuration next = iterate(m, states.back());
    const bool done = (next.rows() - states.back().rows()).norm() <= fp_tol;
    states.push_back(std::move(next));
    if (done) break;
  }
  return states;
}

/// Outcome of the descent-mode search for non-consensus fixed points.
struct DescentResult {
  TrajectoryResult trajectory;  // run with M_A
  double alpha = 0;
  double residual_descent = 0;  // ||f_{M_A}(x) - x|| at the limit
  double residual_weight = 0;   // ||f_A(x) - x|| at the limit
  Classification limit_class{ConfigurationClass::Consensus, 1};
};

/// Runs the iteration with M_A = alpha I - A, which descends V_A.
inline DescentResult find_nonconsensus_fixed_point(const WeightMatrix& a, const Configuration& c0,
                                                   double slack = kDefaultSlack, double fp_tol = kFixedPointTol,
                                                   long max_iter = kMaxIterations) {
  require(is_strictly_diagonally_dominant(a), "descent mode needs a strictly diagonally dominant A");
  const DescentMatrix md = descent_matrix(a, slack);
  RunOptions opts;
  opts.fp_tol = fp_tol;
  opts.max_iter = max_iter;
  DescentResult out{run(IterationMatrix(md), c0, opts), md.alpha()};
  out.residual_descent = out.trajectory.residual;
  out.residual_weight = fixed_point_residual(IterationMatrix(a), out.trajectory.final);
  out.limit_class = classify_configuration(out.trajectory.final);
  return out;
}

}  // namespace spherecons
