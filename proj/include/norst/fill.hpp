#pragma once

#include <span>
#include <vector>

#include "norst/linalg.hpp"

namespace norst {

struct FillSettings {
  double cgls_tol = 1e-16;
  int cgls_max_iter = 20;
  /// Largest accepted condition number of Psi_T.
  double max_condition = 1e8;
};

struct FillResult {
  Vector ell_hat;  ///< y with the missing coordinates replaced
  Vector z_hat;    ///< estimate on T (aligned with the index set), ell_hat_T = -z_hat
  int iterations = 0;
  bool converged = true;
};

/// Projected least squares fill of the missing coordinates T of y against the
/// subspace estimate p_hat: minimizes ||Psi y - Psi_T z|| with Psi = I - P P'.
/// Observed coordinates of the result equal y exactly. Psi is applied through
/// thin products with p_hat and never formed. Throws IllConditioned when
/// |T| >= n - rank or the estimated condition number of Psi_T exceeds
/// settings.max_condition.
FillResult project_ls_fill(const Vector& y, const IndexSet& missing, const BasisMatrix& p_hat,
                           const FillSettings& settings = {});

/// Condition number estimate of Psi_T for basis p_hat and support T.
double restricted_condition(const BasisMatrix& p_hat, const IndexSet& missing);

struct BatchFill {
  Matrix ell_hat;            ///< one column per frame
  std::vector<char> failed;  ///< 1 where the frame was ill-conditioned (column = y)
};

/// Fills every column of y against one basis. OpenMP-parallel over frames;
/// results are identical to fill_batch_serial.
BatchFill fill_batch(const Matrix& y, std::span<const IndexSet> missing, const BasisMatrix& p_hat,
                     const FillSettings& settings = {});

/// Serial reference for fill_batch.
BatchFill fill_batch_serial(const Matrix& y, std::span<const IndexSet> missing, const BasisMatrix& p_hat,
                            const FillSettings& settings = {});

}  // namespace norst
