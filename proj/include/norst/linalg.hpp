#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

#include "norst/errors.hpp"

namespace norst {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kOrthoTol = 1e-10;

/// Sorted, duplicate-free list of row indices in [0, n). Used both for missing
/// supports T_t and for outlier supports.
class IndexSet {
 public:
  IndexSet() = default;
  /// Takes ownership of `indices`; sorts and deduplicates them and checks the bound.
  IndexSet(std::vector<Index> indices, Index n);
  IndexSet(std::initializer_list<Index> indices, Index n);

  static IndexSet all(Index n);

  Index size() const noexcept { return static_cast<Index>(idx_.size()); }
  bool empty() const noexcept { return idx_.empty(); }
  Index operator[](Index i) const { return idx_[static_cast<std::size_t>(i)]; }
  auto begin() const noexcept { return idx_.begin(); }
  auto end() const noexcept { return idx_.end(); }
  const std::vector<Index>& indices() const noexcept { return idx_; }

  bool contains(Index i) const;
  IndexSet complement(Index n) const;
  IndexSet united(const IndexSet& other, Index n) const;
  bool intersects(const IndexSet& other) const;
  bool is_subset_of(const IndexSet& other) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<Index> idx_;
};

/// n x r matrix with orthonormal columns. r == 0 is allowed and denotes the
/// zero subspace (the tracker's zero initialization).
class BasisMatrix {
 public:
  BasisMatrix() = default;
  /// Validates orthonormality to kOrthoTol; throws RankDeficient otherwise.
  explicit BasisMatrix(Matrix columns);

  static BasisMatrix zero(Index n);
  /// Skips the orthonormality check. Only for outputs of routines that
  /// orthonormalize by construction.
  static BasisMatrix trusted(Matrix columns);

  Index ambient_dim() const noexcept { return q_.rows(); }
  Index rank() const noexcept { return q_.cols(); }
  bool is_zero() const noexcept { return q_.cols() == 0; }
  const Matrix& matrix() const noexcept { return q_; }

  /// Q Q' v
  Vector project(const Vector& v) const { return q_ * (q_.transpose() * v); }
  /// (I - Q Q') v
  Vector project_out(const Vector& v) const;
  Matrix project_out(const Matrix& m) const;

 private:
  Matrix q_;
};

double orthonormality_error(const Matrix& q);

/// Orthonormal basis for the column span of m. Throws RankDeficient when the
/// smallest singular value is below 1e-12 times the largest.
BasisMatrix orthonormalize(const Matrix& m);

struct SvdOptions {
  int max_iter = 300;
  double tol = 1e-12;
  /// Extra block columns beyond r; the block is clamped to min(rows, cols).
  Index oversample = 10;
  std::uint64_t seed = 0x5eed5eedULL;
};

struct TruncatedSvd {
  BasisMatrix basis;
  Vector values;
  int iterations = 0;
};

/// Top-r left singular vectors and values by block power iteration with
/// Rayleigh-Ritz extraction. Deterministic for a given options.seed.
TruncatedSvd r_svd(const Matrix& m, Index r, const SvdOptions& opts = {});

/// Matrix-free operator A : R^cols -> R^rows with its adjoint.
struct LinearOperator {
  Index rows = 0;
  Index cols = 0;
  std::function<void(const Vector& x, Vector& out)> apply;
  std::function<void(const Vector& y, Vector& out)> apply_adjoint;
};

struct CglsResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
  double normal_residual = 0.0;  ///< ||A'(b - Ax)|| / ||A'b||
};

/// Conjugate gradient least squares for min ||Ax - b||. Stops when the
/// normal-equation residual drops below max(tol, machine epsilon) relative to
/// ||A'b||, or after max_iter iterations.
CglsResult cgls_solve(const LinearOperator& a, const Vector& b, double tol, int max_iter);

/// ||(I - P1 P1') P2||_2, clamped to [0, 1].
double sin_theta_max(const BasisMatrix& p1, const BasisMatrix& p2);

/// (n / r) * max_i ||row_i(P)||^2
double mu_coherence(const BasisMatrix& p);

/// exp(gamma * B) for skew-symmetric B via scaling and squaring with a
/// degree-13 Pade core.
Matrix skew_expm(const Matrix& b, double gamma);

struct SymmetricEigen {
  Vector values;   ///< nonincreasing
  Matrix vectors;  ///< columns matched to values
};

/// Cyclic Jacobi eigensolver for small symmetric matrices.
SymmetricEigen symmetric_eigen(const Matrix& m, int max_sweeps = 100);

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
double lambda_max_sym(const Matrix& m);

/// Thin SVD of a small matrix by one-sided Jacobi rotations. Returns left
/// singular vectors and values, values nonincreasing.
struct SmallSvd {
  Matrix u;
  Vector s;
};
SmallSvd jacobi_svd(const Matrix& a, int max_sweeps = 100);

/// Spectral norm via Jacobi on the smaller Gram matrix.
double spectral_norm(const Matrix& m);

}  // namespace norst
