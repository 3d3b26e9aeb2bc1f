#include "norst/fill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace norst {

namespace {

Matrix gather_rows(const Matrix& p, const IndexSet& rows) {
  Matrix out(rows.size(), p.cols());
  for (Index k = 0; k < rows.size(); ++k) out.row(k) = p.row(rows[k]);
  return out;
}

// Largest eigenvalue of a small PSD matrix by power iteration, refined with
// the Jacobi solver when it is close to 1.
double gram_lambda_max(const Matrix& g) {
  const Index r = g.rows();
  if (r == 0) return 0.0;
  Vector v = Vector::Ones(r) / std::sqrt(static_cast<double>(r));
  double lam = 0.0;
  for (int it = 0; it < 60; ++it) {
    Vector w = g * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / nw;
    if (std::abs(next - lam) <= 1e-6 * std::abs(next)) {
      lam = next;
      break;
    }
    lam = next;
  }
  if (1.0 - lam < 1e-3) lam = symmetric_eigen(g).values(0);
  return lam;
}

double condition_from_gram(const Matrix& g, Index t_size) {
  const double smax2 = gram_lambda_max(g);
  const double lo = 1.0 - smax2;
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  double hi = 1.0;
  if (t_size <= g.rows()) {
    // All eigenvalues of I - P_T P_T' come from P_T; the largest is 1 - s_min^2.
    const SymmetricEigen e = symmetric_eigen(g);
    hi = 1.0 - e.values(std::min<Index>(t_size, g.rows()) - 1);
  }
  return std::sqrt(hi / lo);
}

}  // namespace

double restricted_condition(const BasisMatrix& p_hat, const IndexSet& missing) {
  if (p_hat.is_zero() || missing.empty()) return 1.0;
  const Matrix pt = gather_rows(p_hat.matrix(), missing);
  return condition_from_gram(pt.transpose() * pt, missing.size());
}

FillResult project_ls_fill(const Vector& y, const IndexSet& missing, const BasisMatrix& p_hat,
                           const FillSettings& settings) {
  const Index n = y.size();
  if (p_hat.ambient_dim() != n) throw DimensionMismatch("project_ls_fill: basis and frame dimensions differ");
  if (!missing.empty() && missing[missing.size() - 1] >= n) throw DimensionMismatch("project_ls_fill: index out of range");

  FillResult res;
  res.ell_hat = y;
  const Index m = missing.size();
  res.z_hat = Vector::Zero(m);
  if (m == 0 || p_hat.is_zero()) {
    // Psi = I: the LS problem decouples and z_hat = (y)_T = 0.
    for (Index k = 0; k < m; ++k) res.z_hat(k) = y(missing[k]);
    for (Index k = 0; k < m; ++k) res.ell_hat(missing[k]) -= res.z_hat(k);
    return res;
  }
  const Matrix& p = p_hat.matrix();
  if (m >= n - p.cols()) {
    throw IllConditioned("project_ls_fill: |T| = " + std::to_string(m) + " leaves fewer than r observed rows");
  }
  const Matrix pt = gather_rows(p, missing);
  const double cond = condition_from_gram(pt.transpose() * pt, m);
  if (!(cond <= settings.max_condition)) {
    throw IllConditioned("project_ls_fill: condition of Psi_T is " + std::to_string(cond));
  }

  // CGLS on A = Psi I_T. Every residual b - A x stays in range(Psi), so
  // A' r = r_T and ||A p||^2 = ||p||^2 - ||P_T' p||^2: the recurrences only
  // ever touch the |T| missing coordinates.
  Vector r_t = -pt * (p.transpose() * y);
  for (Index k = 0; k < m; ++k) r_t(k) += y(missing[k]);
  const double eff_tol = std::max(settings.cgls_tol, std::numeric_limits<double>::epsilon());
  const double s0 = r_t.norm();
  Vector x = Vector::Zero(m);
  if (s0 == 0.0) {
    res.converged = true;
  } else {
    Vector dir = r_t;
    double gamma = r_t.squaredNorm();
    for (int it = 1; it <= settings.cgls_max_iter; ++it) {
      const Vector w = pt.transpose() * dir;
      const double qq = dir.squaredNorm() - w.squaredNorm();
      if (!(qq > 0.0)) break;
      const double step = gamma / qq;
      x.noalias() += step * dir;
      r_t.noalias() -= step * (dir - pt * w);
      const double gamma_next = r_t.squaredNorm();
      res.iterations = it;
      if (std::sqrt(gamma_next) <= eff_tol * s0) {
        res.converged = true;
        break;
      }
      dir = r_t + (gamma_next / gamma) * dir;
      gamma = gamma_next;
    }
  }
  res.z_hat = std::move(x);
  for (Index k = 0; k < m; ++k) res.ell_hat(missing[k]) -= res.z_hat(k);
  return res;
}

namespace {

void fill_one(const Matrix& y, std::span<const IndexSet> missing, const BasisMatrix& p_hat,
              const FillSettings& settings, Index t, BatchFill& out) {
  try {
    out.ell_hat.col(t) = project_ls_fill(y.col(t), missing[static_cast<std::size_t>(t)], p_hat, settings).ell_hat;
  } catch (const IllConditioned&) {
    out.ell_hat.col(t) = y.col(t);
    out.failed[static_cast<std::size_t>(t)] = 1;
  }
}

void check_batch(const Matrix& y, std::span<const IndexSet> missing) {
  if (static_cast<Index>(missing.size()) != y.cols()) throw ShapeMismatch("fill_batch: one index set per column required");
}

}  // namespace

BatchFill fill_batch(const Matrix& y, std::span<const IndexSet> missing, const BasisMatrix& p_hat,
                     const FillSettings& settings) {
  check_batch(y, missing);
  BatchFill out;
  out.ell_hat.resize(y.rows(), y.cols());
  out.failed.assign(static_cast<std::size_t>(y.cols()), 0);
  const Index d = y.cols();
#pragma omp parallel for schedule(dynamic, 4) if (d >= 16)
  for (Index t = 0; t < d; ++t) fill_one(y, missing, p_hat, settings, t, out);
  return out;
}

BatchFill fill_batch_serial(const Matrix& y, std::span<const IndexSet> missing, const BasisMatrix& p_hat,
                            const FillSettings& settings) {
  check_batch(y, missing);
  BatchFill out;
  out.ell_hat.resize(y.rows(), y.cols());
  out.failed.assign(static_cast<std::size_t>(y.cols()), 0);
  for (Index t = 0; t < y.cols(); ++t) fill_one(y, missing, p_hat, settings, t, out);
  return out;
}

}  // namespace norst
