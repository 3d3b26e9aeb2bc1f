#pragma once

// Dense reference computations shared by the unit and acceptance tests.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "norst/datagen.hpp"
#include "norst/linalg.hpp"

namespace norst::testing {

inline Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
  }
  return m;
}

/// Top-r left singular vectors from Eigen's two-sided Jacobi SVD.
inline BasisMatrix dense_left_basis(const Matrix& m, Index r) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  return BasisMatrix::trusted(svd.matrixU().leftCols(r));
}

inline Matrix pinv(const Matrix& a) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return cod.pseudoInverse();
}

/// Projected LS by forming Psi = I - P P' and its restriction explicitly:
/// z = (Psi_T)^+ Psi y, ell = y - I_T z.
inline Vector dense_projected_ls(const Vector& y, const IndexSet& t, const Matrix& p) {
  const Index n = y.size();
  if (t.empty()) return y;
  const Matrix psi = Matrix::Identity(n, n) - p * p.transpose();
  Matrix psi_t(n, t.size());
  for (Index k = 0; k < t.size(); ++k) psi_t.col(k) = psi.col(t[k]);
  const Vector z = pinv(psi_t) * (psi * y);
  Vector out = y;
  for (Index k = 0; k < t.size(); ++k) out(t[k]) -= z(k);
  return out;
}

/// ell = P (P_Omega)^+ y_Omega by dense pseudoinverse.
inline Vector dense_coefficient_ls(const Vector& y, const IndexSet& omega, const Matrix& p) {
  Matrix po(omega.size(), p.cols());
  Vector yo(omega.size());
  for (Index k = 0; k < omega.size(); ++k) {
    po.row(k) = p.row(omega[k]);
    yo(k) = y(omega[k]);
  }
  return p * (pinv(po) * yo);
}

/// Definition-level max-miss-frac counters with plain loops.
inline MissFracStats exhaustive_miss_frac(const std::vector<IndexSet>& sets, Index n, Index alpha) {
  const Index d = static_cast<Index>(sets.size());
  MissFracStats out;
  for (Index t = 0; t < d; ++t) {
    Index count = 0;
    for (Index i = 0; i < n; ++i) count += sets[static_cast<std::size_t>(t)].contains(i) ? 1 : 0;
    out.col = std::max(out.col, static_cast<double>(count) / static_cast<double>(n));
  }
  for (Index start = 0; start + alpha <= d; ++start) {
    for (Index i = 0; i < n; ++i) {
      Index count = 0;
      for (Index t = start; t < start + alpha; ++t) count += sets[static_cast<std::size_t>(t)].contains(i) ? 1 : 0;
      out.row_alpha = std::max(out.row_alpha, static_cast<double>(count) / static_cast<double>(alpha));
    }
  }
  return out;
}

}  // namespace norst::testing
