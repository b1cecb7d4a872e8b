#pragma once

// Small dense helpers on top of Eigen.

#include "spherecons/common.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstring>
#include <limits>
#include <vector>

namespace spherecons {

inline Vector singular_values(const Matrix& m) {
  if (m.size() == 0) return Vector{};
  return Eigen::BDCSVD<Matrix>(m).singularValues();
}

/// Number of singular values above `rel_tol` times the largest one.
inline Index numerical_rank(const Matrix& m, double rel_tol = kRankTol) {
  const Vector s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = rel_tol * s(0);
  return static_cast<Index>((s.array() > cut).count());
}

inline ComplexVector eigenvalues(const Matrix& m) {
  if (m.size() == 0) return ComplexVector{};
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() == Eigen::Success) return solver.eigenvalues();
  // The real Schur iteration can stall on highly degenerate spectra; the
  // complex QR iteration with a larger sweep budget is the fallback.
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> complex_solver;
  complex_solver.setMaxIterations(200);
  complex_solver.compute(m.cast<std::complex<double>>(), /*computeEigenvectors=*/false);
  if (complex_solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue iteration did not converge");
  return complex_solver.eigenvalues();
}

inline double spectral_radius(const ComplexVector& eig) {
  double r = 0.0;
  for (Index i = 0; i < eig.size(); ++i) r = std::max(r, std::abs(eig(i)));
  return r;
}

inline double spectral_radius(const Matrix& m) { return spectral_radius(eigenvalues(m)); }

/// Eigenvalues sorted by decreasing magnitude, ties broken by real then imaginary part.
inline std::vector<std::complex<double>> sorted_by_magnitude(const ComplexVector& eig) {
  std::vector<std::complex<double>> out(eig.data(), eig.data() + eig.size());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return out;
}

inline double max_abs_asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// 64-bit FNV-1a over the raw bytes of the entries. Used as a record fingerprint.
inline std::uint64_t fingerprint(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  mix(dims, sizeof(dims));
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j) == 0.0 ? 0.0 : m(i, j);  // fold -0.0
      mix(&v, sizeof(v));
    }
  return h;
}

}  // namespace spherecons
