#pragma once

// Differential of the iteration map and fixed-point stability tests.
//
// With y = f(x) the projected Jacobian is J = P_y (D(AX) A (x) I_d) P_x, and in
// orthonormal tangent frames R_x, R_y the differential is represented by
// M = R_y^T (D(AX) A (x) I_d) R_x, so that J = R_y M R_x^T.

#include "spherecons/common.hpp"
#include "spherecons/dynamics.hpp"
#include "spherecons/linalg.hpp"
#include "spherecons/sphere_state.hpp"
#include "spherecons/weights.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace spherecons {

/// nd x nd projected Jacobian. Block (i,j) is m_ij P_{y_i} P_{x_j} / ||[MX]_i||.
inline Matrix projected_jacobian(const IterationMatrix& m, const Configuration& c) {
  const Index n = c.agents(), d = c.dim();
  const Vector scale = normalization_diagonal(m, c);
  const Configuration y = iterate(m, c);
  const Matrix px = projection_matrix(c);
  const Matrix py = projection_matrix(y);
  Matrix j = Matrix::Zero(n * d, n * d);
  for (Index bi = 0; bi < n; ++bi)
    for (Index bj = 0; bj < n; ++bj) {
      const double w = m.entries()(bi, bj) * scale(bi);
      if (w == 0.0) continue;
      j.block(bi * d, bj * d, d, d) = w * py.block(bi * d, bi * d, d, d) * px.block(bj * d, bj * d, d, d);
    }
  return j;
}

/// n(d-1) x n(d-1) matrix of the differential in the given frames.
/// Block (i,j) is m_ij R_{y_i}^T R_{x_j} / ||[MX]_i||.
inline Matrix reduced_matrix(const IterationMatrix& m, const Configuration& c, const TangentBasis& at_x,
                             const TangentBasis& at_y) {
  const Index n = c.agents(), d = c.dim();
  require(at_x.agents() == n && at_y.agents() == n && at_x.dim() == d && at_y.dim() == d,
          "tangent bases do not match the configuration");
  const Vector scale = normalization_diagonal(m, c);
  const Index k = d - 1;
  Matrix out = Matrix::Zero(n * k, n * k);
  for (Index bi = 0; bi < n; ++bi)
    for (Index bj = 0; bj < n; ++bj) {
      const double w = m.entries()(bi, bj) * scale(bi);
      if (w == 0.0) continue;
      out.block(bi * k, bj * k, k, k) = w * at_y.block(bi).transpose() * at_x.block(bj);
    }
  return out;
}

struct DifferentialReport {
  Matrix jacobian;        // J, nd x nd
  Matrix reduced;         // M, n(d-1) x n(d-1)
  TangentBasis basis_x;   // frames at x
  TangentBasis basis_y;   // frames at y = f(x)
  ComplexVector eigenvalues;  // of M
  double spectral_radius = 0;
  double det = 0;         // det(M)
  Vector angles;          // theta_i = arccos(x_i^T y_i)
};

inline DifferentialReport differential_report(const IterationMatrix& m, const Configuration& c) {
  const Configuration y = iterate(m, c);
  TangentBasis bx = tangent_basis(c);
  TangentBasis by = tangent_basis(y);
  Matrix reduced = reduced_matrix(m, c, bx, by);
  ComplexVector eig = eigenvalues(reduced);
  Vector angles(c.agents());
  for (Index i = 0; i < c.agents(); ++i)
    angles(i) = std::acos(std::clamp(c.rows().row(i).dot(y.rows().row(i)), -1.0, 1.0));
  const double rho = spectral_radius(eig);
  const double det = reduced.determinant();
  return DifferentialReport{projected_jacobian(m, c), std::move(reduced), std::move(bx), std::move(by),
                            std::move(eig), rho, det, std::move(angles)};
}

struct DeterminantCheck {
  double det = 0;
  double scale = 0;              // product of the row norms of M (Hadamard bound)
  bool sqrt2_condition = false;  // a_ii > sqrt(2) sum_{j!=i} a_ij
  bool nonzero = false;          // |det| > 1e-12 * scale
  double relative() const { return scale > 0 ? std::abs(det) / scale : 0.0; }
};

inline DeterminantCheck determinant_nonzero_check(const WeightMatrix& a, const Configuration& c) {
  const IterationMatrix m(a);
  const Configuration y = iterate(m, c);
  const Matrix reduced = reduced_matrix(m, c, tangent_basis(c), tangent_basis(y));
  DeterminantCheck out;
  out.det = reduced.determinant();
  out.scale = reduced.rowwise().norm().prod();
  out.sqrt2_condition = satisfies_sqrt2_condition(a);
  out.nonzero = std::abs(out.det) > 1e-12 * out.scale;
  return out;
}

/// H(x) = P_x ((A - diag(||[AX]_i||)) (x) I_d) P_x for symmetric A.
inline Matrix certificate_matrix(const WeightMatrix& a, const Configuration& c) {
  require(a.is_symmetric(), "the H certificate needs a symmetric weight matrix");
  const Index n = c.agents(), d = c.dim();
  const Vector inv_norm = normalization_diagonal(IterationMatrix(a), c);
  const Matrix px = projection_matrix(c);
  Matrix h = Matrix::Zero(n * d, n * d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double w = a(i, j) - (i == j ? 1.0 / inv_norm(i) : 0.0);
      if (w == 0.0) continue;
      h.block(i * d, j * d, d, d) = w * px.block(i * d, i * d, d, d) * px.block(j * d, j * d, d, d);
    }
  return h;
}

enum class StabilityClass { ConsensusNeutral, UnstableCertified, NeutralNonConsensus, Inconclusive };

inline const char* to_string(StabilityClass k) {
  switch (k) {
    case StabilityClass::ConsensusNeutral: return "consensus-neutral";
    case StabilityClass::UnstableCertified: return "unstable";
    case StabilityClass::NeutralNonConsensus: return "neutral-nonconsensus";
    case StabilityClass::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct StabilityClassification {
  StabilityClass kind = StabilityClass::Inconclusive;
  double spectral_radius = 0;
  std::optional<double> h_top_eigenvalue;  // set when the H path was evaluated
  Classification configuration{ConfigurationClass::Consensus, 1};
};

struct CertificateOptions {
  double fixed_point_tol = 1e-9;
  double class_tol = kClassTol;
};

/// Stability class of a fixed point of the A-iteration.
///
/// For symmetric A the top eigenvalue of H is computed first; a positive value
/// certifies instability once rho(M) > 1 + class_tol is also confirmed. All other
/// cases fall back to the spectral radius and the configuration class.
inline StabilityClassification instability_certificate(const WeightMatrix& a, const Configuration& c,
                                                       const CertificateOptions& opts = {}) {
  const IterationMatrix m(a);
  const double residual = fixed_point_residual(m, c);
  require(residual <= opts.fixed_point_tol,
          "instability_certificate needs a fixed point (residual " + std::to_string(residual) + ")");
  StabilityClassification out;
  out.configuration = classify_configuration(c);
  out.spectral_radius = differential_report(m, c).spectral_radius;
  const bool radius_above = out.spectral_radius > 1.0 + opts.class_tol;

  if (a.is_symmetric()) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(certificate_matrix(a, c), Eigen::EigenvaluesOnly);
    out.h_top_eigenvalue = es.eigenvalues().maxCoeff();
    if (*out.h_top_eigenvalue > opts.class_tol) {
      out.kind = radius_above ? StabilityClass::UnstableCertified : StabilityClass::Inconclusive;
      return out;
    }
  }
  if (radius_above) {
    out.kind = StabilityClass::UnstableCertified;
  } else if (out.spectral_radius < 1.0 - opts.class_tol) {
    // Global rotations always give eigenvalue 1 at a fixed point.
    out.kind = StabilityClass::Inconclusive;
  } else if (out.configuration.kind == ConfigurationClass::Consensus) {
    out.kind = StabilityClass::ConsensusNeutral;
  } else {
    out.kind = StabilityClass::NeutralNonConsensus;
  }
  return out;
}

struct TraceFormulaCheck {
  double lhs = 0;  // tr((1^T (x) I) H (1 (x) I))
  double rhs = 0;  // sum_i sum_{j!=i} a_ij (d - 2 + cos^2 - (d-1) cos)
  bool match = false;
};

/// Compares tr(H~) with its closed form. The two agree at fixed points, where
/// ||[AX]_i|| = x_i^T [AX]_i.
inline TraceFormulaCheck trace_formula_check(const WeightMatrix& a, const Configuration& c) {
  const Index n = c.agents(), d = c.dim();
  const Matrix h = certificate_matrix(a, c);
  Matrix folded = Matrix::Zero(d, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) folded += h.block(i * d, j * d, d, d);
  TraceFormulaCheck out;
  out.lhs = folded.trace();
  const double dd = static_cast<double>(d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double cs = c.rows().row(i).dot(c.rows().row(j));
      out.rhs += a(i, j) * (dd - 2.0 + cs * cs - (dd - 1.0) * cs);
    }
  out.match = std::abs(out.lhs - out.rhs) <= 1e-10 * (1.0 + std::abs(out.rhs));
  return out;
}

struct NeutralityCheck {
  bool applicable = false;   // d = 2, fixed point, positive dots on every edge
  bool neutral = false;      // rho(M) = 1 within 1e-9
  double spectral_radius = 0;
  double max_row_sum_error = 0;  // max_i |sum_j M_ij - 1|
};

/// For d = 2 fixed points whose neighbouring states all have positive dot
/// product, the differential in rotation frames is right-stochastic.
inline NeutralityCheck positive_dot_neutrality_check(const WeightMatrix& a, const Configuration& c,
                                                     double fixed_point_tol = 1e-9) {
  NeutralityCheck out;
  if (c.dim() != 2) return out;
  const IterationMatrix m(a);
  if (fixed_point_residual(m, c) > fixed_point_tol) return out;
  const Matrix gram = c.rows() * c.rows().transpose();
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < a.size(); ++j)
      if (a(i, j) > 0.0 && !(gram(i, j) > 0.0)) return out;
  out.applicable = true;
  const DifferentialReport report = differential_report(m, c);
  out.spectral_radius = report.spectral_radius;
  out.max_row_sum_error = (report.reduced.rowwise().sum().array() - 1.0).abs().maxCoeff();
  out.neutral = std::abs(out.spectral_radius - 1.0) <= 1e-9;
  return out;
}

}  // namespace spherecons
