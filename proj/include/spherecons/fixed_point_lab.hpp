#pragma once

// Parametric view of the fixed-point equations.
//
// A configuration x is a fixed point of the A-iteration exactly when
//   g(A, D, x) = (A (x) I) x - (D (x) I) x = 0
// for the positive diagonal D = diag(||[AX]_i||). Note that D here holds the row
// norms themselves, the reciprocal of the normalization diagonal D(AX) used by
// the iteration. This header builds g, its Jacobian blocks with respect to A,
// D and x, and the rank tests on them.

#include "spherecons/common.hpp"
#include "spherecons/graph.hpp"
#include "spherecons/linalg.hpp"
#include "spherecons/sphere_state.hpp"
#include "spherecons/weights.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace spherecons {

/// g(A, D, x) for the n x m state matrix X, returned agent-major (length nm).
inline Vector residual_g(const Matrix& a, const Vector& dvec, const Matrix& x) {
  const Index n = x.rows(), m = x.cols();
  require(a.rows() == n && a.cols() == n && dvec.size() == n, "residual_g: dimension mismatch");
  const Matrix r = a * x - dvec.asDiagonal() * x;
  Vector out(n * m);
  for (Index i = 0; i < n; ++i) out.segment(i * m, m) = r.row(i).transpose();
  return out;
}

inline Vector residual_g(const WeightMatrix& a, const Vector& dvec, const Configuration& c) {
  return residual_g(a.entries(), dvec, c.rows());
}

/// dvec_i = ||[AX]_i||_2.
inline Vector compute_D(const Matrix& a, const Matrix& x) {
  require(a.rows() == x.rows() && a.cols() == x.rows(), "compute_D: dimension mismatch");
  const Matrix ax = a * x;
  Vector out(ax.rows());
  for (Index i = 0; i < ax.rows(); ++i) {
    out(i) = ax.row(i).norm();
    if (!(out(i) > kMinRowNorm)) throw ZeroRowImage(i, out(i));
  }
  return out;
}

inline Vector compute_D(const WeightMatrix& a, const Configuration& c) { return compute_D(a.entries(), c.rows()); }

/// Diagonals of K_A = diag(vec(B(G)^T)) and K_D = diag(vec(I_n)).
struct StructureMasks {
  Vector k_a;
  Vector k_d;
};

inline StructureMasks structure_masks(const DirectedGraph& g) {
  const Index n = g.size();
  const Matrix b = structure_matrix(g);
  StructureMasks out{Vector::Zero(n * n), Vector::Zero(n * n)};
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) out.k_a(i * n + j) = b(i, j);  // vec(B^T) walks the rows of B
    out.k_d(i * n + i) = 1.0;
  }
  return out;
}

/// Column-major vec.
inline Vector vec(const Matrix& c) { return Eigen::Map<const Vector>(c.data(), c.size()); }

/// Lower triangle including the diagonal, stacked column by column.
inline Vector vech(const Matrix& c) {
  require(c.rows() == c.cols(), "vech needs a square matrix");
  const Index n = c.rows();
  Vector out(n * (n + 1) / 2);
  Index k = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) out(k++) = c(i, j);
  return out;
}

/// D_n with D_n vech(C) = vec(C) for every symmetric C.
inline Matrix duplication_matrix(Index n) {
  require(n >= 1, "duplication_matrix: n must be >= 1");
  Matrix dn = Matrix::Zero(n * n, n * (n + 1) / 2);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const Index lo = std::min(i, j), hi = std::max(i, j);
      const Index k = lo * n - lo * (lo - 1) / 2 + (hi - lo);
      dn(j * n + i, k) = 1.0;
    }
  return dn;
}

/// Configuration rotated so that its first row is e_1 and its last d - m
/// columns vanish; those columns are dropped.
struct PinnedConfiguration {
  Matrix x;         // n x m, unit rows, first row e_1
  Index m = 0;      // numerical rank of the original X
  Matrix rotation;  // d x d orthogonal R with X R = [x, 0]
};

inline PinnedConfiguration pin_configuration(const Configuration& c, double rank_tol = kRankTol) {
  const Index d = c.dim();
  const Eigen::JacobiSVD<Matrix> svd(c.rows(), Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const Index m = static_cast<Index>((s.array() > rank_tol * s(0)).count());
  const Matrix& v = svd.matrixV();

  // Orthonormal basis of the row space whose first vector is x_1: coordinates
  // of x_1 in V_m, completed to an m x m orthogonal frame.
  Vector coords = v.leftCols(m).transpose() * c.agent(0);
  coords.normalize();
  Matrix frame(m, m);
  frame.col(0) = coords;
  if (m >= 2) frame.rightCols(m - 1) = tangent_frame(coords);
  const Matrix q = v.leftCols(m) * frame;

  PinnedConfiguration out;
  out.m = m;
  out.rotation.resize(d, d);
  out.rotation.leftCols(m) = q;
  out.rotation.rightCols(d - m) = v.rightCols(d - m);
  out.x = (c.rows() * out.rotation).leftCols(m);
  for (Index i = 0; i < out.x.rows(); ++i) out.x.row(i).normalize();
  out.x.row(0).setZero();
  out.x(0, 0) = 1.0;
  return out;
}

/// (A, D, x) in pinned form, checked to satisfy g = 0.
struct FixedPointSystem {
  WeightMatrix a;
  Vector dvec;
  Matrix x;            // n x m pinned states
  Index m = 0;
  Index ambient_dim = 0;
  double residual = 0;  // ||g(A, D, x)||_inf
};

inline FixedPointSystem make_fixed_point_system(const WeightMatrix& a, const Configuration& c,
                                                double residual_tol = 1e-10) {
  require(a.size() == c.agents(), "make_fixed_point_system: dimension mismatch");
  PinnedConfiguration pinned = pin_configuration(c);
  Vector dvec = compute_D(a.entries(), pinned.x);
  const double residual = residual_g(a.entries(), dvec, pinned.x).cwiseAbs().maxCoeff();
  require(residual <= residual_tol, "configuration is not a fixed point (||g||_inf = " + std::to_string(residual) + ")");
  return FixedPointSystem{a, std::move(dvec), std::move(pinned.x), pinned.m, c.dim(), residual};
}

/// Column blocks of J_g = [J_{g,A}, J_{g,D}, J_{g,x}].
struct JgBlocks {
  Matrix wrt_a;  // nm x n^2, or nm x n(n+1)/2 for the symmetric parametrization
  Matrix wrt_d;  // nm x n^2
  Matrix wrt_x;  // nm x (n-1)m, first agent's directions removed
  Matrix full() const {
    Matrix out(wrt_a.rows(), wrt_a.cols() + wrt_d.cols() + wrt_x.cols());
    out << wrt_a, wrt_d, wrt_x;
    return out;
  }
};

/// J_{g,A} = (I_n (x) X^T) K_A, times D_n when `symmetric`;
/// J_{g,D} = -(I_n (x) X^T) K_D;  J_{g,x} = ((A - D) (x) I_m) P_x.
inline JgBlocks assemble_Jg(const FixedPointSystem& sys, bool symmetric) {
  const Index n = sys.x.rows(), m = sys.m;
  const StructureMasks masks = structure_masks(sys.a.graph());

  Matrix ix = Matrix::Zero(n * m, n * n);  // I_n (x) X^T
  for (Index i = 0; i < n; ++i) ix.block(i * m, i * n, m, n) = sys.x.transpose();

  JgBlocks out;
  out.wrt_a = ix * masks.k_a.asDiagonal();
  if (symmetric) out.wrt_a = out.wrt_a * duplication_matrix(n);
  out.wrt_d = -(ix * masks.k_d.asDiagonal());

  Matrix shifted = sys.a.entries();
  shifted.diagonal() -= sys.dvec;
  Matrix jx = Matrix::Zero(n * m, n * m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (shifted(i, j) == 0.0) continue;
      const Vector xj = sys.x.row(j).transpose();
      jx.block(i * m, j * m, m, m) = shifted(i, j) * (Matrix::Identity(m, m) - xj * xj.transpose());
    }
  out.wrt_x = jx.rightCols((n - 1) * m);
  return out;
}

/// Vectors vec(R0 X^T) for the basis of skew-symmetric R0 (m(m-1)/2 columns).
inline Matrix skew_null_vectors(const FixedPointSystem& sys) {
  const Index n = sys.x.rows(), m = sys.m;
  Matrix out(n * m, m * (m - 1) / 2);
  Index col = 0;
  for (Index p = 0; p < m; ++p)
    for (Index q = p + 1; q < m; ++q) {
      Matrix r0 = Matrix::Zero(m, m);
      r0(p, q) = 1.0;
      r0(q, p) = -1.0;
      const Matrix rx = r0 * sys.x.transpose();  // m x n, column i is R0 x_i
      out.col(col++) = vec(rx);
    }
  return out;
}

struct RankAnalysis {
  Index n = 0, d = 0, m = 0;
  bool symmetric = false;
  Index rank = 0;
  Index bound = 0;
  bool satisfied = false;
  Vector min_singular_values;  // smallest singular values of J_g, ascending
  double null_residual = 0;    // max ||w^T J_g|| / ||w|| over the skew null vectors
};

namespace detail {
inline RankAnalysis analyse_rank(const FixedPointSystem& sys, bool symmetric) {
  const Matrix jg = assemble_Jg(sys, symmetric).full();
  RankAnalysis out;
  out.n = sys.x.rows();
  out.d = sys.ambient_dim;
  out.m = sys.m;
  out.symmetric = symmetric;
  out.rank = numerical_rank(jg, kRankTol);
  const Vector s = singular_values(jg);
  const Index k = std::min<Index>(s.size(), std::max<Index>(3, sys.m * (sys.m - 1) / 2 + 1));
  out.min_singular_values = s.tail(k).reverse();
  const Matrix w = skew_null_vectors(sys);
  for (Index c = 0; c < w.cols(); ++c)
    out.null_residual = std::max(out.null_residual, (w.col(c).transpose() * jg).norm() / w.col(c).norm());
  return out;
}
}  // namespace detail

/// Non-symmetric parametrization: satisfied iff J_g has full row rank nm.
inline RankAnalysis full_rank_check(const FixedPointSystem& sys) {
  RankAnalysis out = detail::analyse_rank(sys, false);
  out.bound = out.n * out.m;
  out.satisfied = out.rank == out.bound;
  return out;
}

/// Symmetric parametrization on the complete graph: satisfied iff
/// rank(J_g) <= nm - m(m-1)/2.
inline RankAnalysis symmetric_rank_deficiency_check(const FixedPointSystem& sys) {
  require(sys.a.graph() == complete_graph(sys.a.size()), "symmetric rank check needs the complete graph");
  require(sys.a.is_symmetric(), "symmetric rank check needs a symmetric weight matrix");
  RankAnalysis out = detail::analyse_rank(sys, true);
  out.bound = out.n * out.m - out.m * (out.m - 1) / 2;
  out.satisfied = out.rank <= out.bound;
  return out;
}

}  // namespace spherecons
