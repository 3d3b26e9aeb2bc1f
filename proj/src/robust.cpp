#include "norst/robust.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace norst {

void RobustParams::validate(Index r) const {
  if (!(x_min > 0.0)) throw std::invalid_argument("RobustParams: x_min must be > 0");
  if (!(effective_xi() > 0.0)) throw std::invalid_argument("RobustParams: xi must be > 0");
  if (!(effective_omega() > 0.0)) throw std::invalid_argument("RobustParams: omega_supp must be > 0");
  if (t_train < r) throw std::invalid_argument("RobustParams: t_train must be >= r");
  if (altproj_iters < 1 || cs_max_iter < 1) throw std::invalid_argument("RobustParams: iteration caps must be >= 1");
}

// ------------------------------------------------------------ modified CS

namespace {

// ||y_tilde - Psi x|| with Psi = I - P P'.
double cs_residual(const Vector& y_tilde, const Matrix& p, const Vector& x) {
  Vector r = y_tilde - x;
  if (p.cols() > 0) r.noalias() += p * (p.transpose() * x);
  return r.norm();
}

// FISTA on 0.5 ||y_tilde - Psi x||^2 + lam ||x_pen||_1. Psi is a projector,
// so the gradient step from z is y_tilde + P P' z with unit step size.
int fista(const Vector& y_tilde, const Matrix& p, const std::vector<char>& penalized, double lam, Vector& x,
          int max_iter, double tol, bool& converged) {
  const Index n = y_tilde.size();
  Vector z = x;
  Vector next(n);
  double tk = 1.0;
  converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    next = y_tilde;
    if (p.cols() > 0) next.noalias() += p * (p.transpose() * z);
    for (Index i = 0; i < n; ++i) {
      if (!penalized[static_cast<std::size_t>(i)]) continue;
      const double v = next(i);
      next(i) = std::abs(v) > lam ? v - std::copysign(lam, v) : 0.0;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    const double diff = (next - x).norm();
    z = next + ((tk - 1.0) / t_next) * (next - x);
    x.swap(next);
    tk = t_next;
    if (diff <= tol * std::max(1.0, x.norm())) {
      converged = true;
      return it;
    }
  }
  return max_iter;
}

}  // namespace

CsResult modified_cs(const Vector& y_tilde, const BasisMatrix& p_hat, const IndexSet& t_known, double xi,
                     int max_iter, double tol) {
  if (!(xi > 0.0)) throw std::invalid_argument("modified_cs: xi must be > 0");
  const Index n = y_tilde.size();
  if (p_hat.ambient_dim() != n) throw DimensionMismatch("modified_cs: basis and vector dimensions differ");
  const Matrix& p = p_hat.matrix();
  std::vector<char> penalized(static_cast<std::size_t>(n), 1);
  for (Index i : t_known) penalized[static_cast<std::size_t>(i)] = 0;

  CsResult res;
  res.x = Vector::Zero(n);
  res.residual = y_tilde.norm();
  res.converged = true;
  if (res.residual <= xi) return res;  // zero is feasible and has zero cost

  const double slack = xi * (1.0 + 1e-3);
  double hi = res.residual;
  Vector x = Vector::Zero(n);
  bool conv = false;
  res.iterations += fista(y_tilde, p, penalized, hi, x, max_iter, tol, conv);
  double r_hi = cs_residual(y_tilde, p, x);
  if (r_hi <= slack) {
    res.x = x;
    res.residual = r_hi;
    res.lambda = hi;
    res.converged = conv;
    return res;
  }

  // Walk down a decade at a time to find a feasible penalty.
  double lo = hi;
  bool found = false;
  Vector best;
  double best_res = 0.0;
  bool best_conv = false;
  while (lo > hi * 1e-12) {
    lo /= 10.0;
    res.iterations += fista(y_tilde, p, penalized, lo, x, max_iter, tol, conv);
    const double r = cs_residual(y_tilde, p, x);
    if (r <= slack) {
      found = true;
      best = x;
      best_res = r;
      best_conv = conv;
      break;
    }
    hi = lo;
  }
  if (!found) {
    res.x = x;
    res.residual = cs_residual(y_tilde, p, x);
    res.lambda = lo;
    res.converged = false;
    return res;
  }

  // Bisection in log(lambda) for the largest feasible penalty.
  for (int step = 0; step < 40 && hi / lo > 1.0 + 1e-3 && best_res < (1.0 - 1e-2) * xi; ++step) {
    const double mid = std::sqrt(lo * hi);
    res.iterations += fista(y_tilde, p, penalized, mid, x, max_iter, tol, conv);
    const double r = cs_residual(y_tilde, p, x);
    if (r <= slack) {
      lo = mid;
      best = x;
      best_res = r;
      best_conv = conv;
    } else {
      hi = mid;
    }
  }
  res.x = std::move(best);
  res.residual = best_res;
  res.lambda = lo;
  res.converged = best_conv;
  return res;
}

IndexSet support_estimate(const Vector& x_cs, const IndexSet& t_known, double omega) {
  std::vector<Index> idx(t_known.begin(), t_known.end());
  for (Index i = 0; i < x_cs.size(); ++i) {
    if (std::abs(x_cs(i)) > omega) idx.push_back(i);
  }
  return IndexSet(std::move(idx), x_cs.size());
}

// --------------------------------------------------------------- AltProj

namespace {

Matrix hard_threshold(const Matrix& m, double zeta) {
  return m.unaryExpr([zeta](double v) { return std::abs(v) > zeta ? v : 0.0; });
}

// 1.4826 times the median absolute entry: the standard deviation for Gaussian
// entries, insensitive to a minority of large ones.
double robust_scale(const Matrix& m) {
  std::vector<double> mags(static_cast<std::size_t>(m.size()));
  std::transform(m.data(), m.data() + m.size(), mags.begin(), [](double v) { return std::abs(v); });
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  return 1.4826 * *mid;
}

// Top singular value by power iteration. The value converges quadratically
// in the direction error, so a fixed small count is enough for a threshold.
double top_singular_value(const Matrix& m, std::uint64_t seed, int iters = 30) {
  if (m.size() == 0) return 0.0;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Vector v(m.cols());
  for (Index i = 0; i < v.size(); ++i) v(i) = normal(gen);
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double nv = v.norm();
    if (!(nv > 0.0)) return 0.0;
    v /= nv;
    const Vector u = m * v;
    sigma = u.norm();
    v = m.transpose() * u;
  }
  return sigma;
}

}  // namespace

AltProjResult altproj_init(const Matrix& y_train, Index r, int max_iter, double tol, const SvdOptions& svd) {
  const Index n = y_train.rows();
  const Index t = y_train.cols();
  if (t < r || n < r) throw std::invalid_argument("altproj_init: need at least r rows and columns");
  const double y_norm = y_train.norm();
  AltProjResult out;
  out.sparse = Matrix::Zero(n, t);
  if (!(y_norm > 0.0)) {
    out.basis = r_svd(y_train, r, svd).basis;
    out.low_rank = Matrix::Zero(n, t);
    out.converged = true;
    return out;
  }
  // Start at five robust standard deviations of the entries: inliers of an
  // incoherent low-rank matrix rarely exceed it, sparse outliers well above
  // the bulk do. r / sqrt(n t) times the spectral tail adds the usual AltProj
  // term once the fit is under way.
  const double beta = static_cast<double>(r) / std::sqrt(static_cast<double>(n) * static_cast<double>(t));
  TruncatedSvd sv = r_svd(y_train, r, svd);
  const double scale0 = robust_scale(y_train);
  const double zeta0 = scale0 > 0.0 ? 5.0 * scale0 : beta * sv.values(0);

  double zeta = zeta0;
  double decay = 1.0;
  Matrix low = Matrix::Zero(n, t);
  for (int it = 1; it <= max_iter; ++it) {
    out.sparse = hard_threshold(y_train - low, zeta);
    const Matrix m = y_train - out.sparse;
    sv = r_svd(m, r, svd);
    const Matrix& u = sv.basis.matrix();
    Matrix next = u * (u.transpose() * m);
    // The residual alone is small as soon as the threshold is, so the
    // low-rank iterate must also have settled.
    const double next_norm = next.norm();
    const double moved = next_norm > 0.0 ? (next - low).norm() / next_norm : 0.0;
    low = std::move(next);
    out.iterations = it;
    decay *= 0.7;
    // The decaying term alone can undercut the current fit error and lock
    // inlier entries into the sparse part; the residual scale keeps it above.
    const Matrix resid_m = y_train - low;
    const double tail = r < std::min(n, t) ? top_singular_value(m - low, svd.seed) : 0.0;
    zeta = beta * tail + zeta0 * decay + 5.0 * robust_scale(resid_m);
    out.sparse = hard_threshold(resid_m, zeta);
    const double resid = (resid_m - out.sparse).norm() / y_norm;
    if (resid <= tol && moved <= tol) {
      out.converged = true;
      break;
    }
  }
  out.low_rank = std::move(low);
  out.basis = r_svd(out.low_rank, r, svd).basis;
  return out;
}

// --------------------------------------------------------- RobustTracker

RobustTracker::RobustTracker(Index n, TrackerParams params, RobustParams robust, BasisMatrix initial)
    : robust_(robust), tracker_(n, std::move(params), std::move(initial), robust.t_train + 1) {
  robust_.validate(tracker_.params().r);
}

RobustFrame RobustTracker::step(const Vector& y, const IndexSet& missing) {
  const Index n = tracker_.ambient_dim();
  if (y.size() != n) throw DimensionMismatch("RobustTracker::step: frame has wrong length");
  const BasisMatrix& p = tracker_.basis();
  const Vector y_tilde = p.project_out(y);
  CsResult cs = modified_cs(y_tilde, p, missing, robust_.effective_xi(), robust_.cs_max_iter, robust_.cs_tol);
  const double omega =
      robust_.auto_omega ? 0.9 * y.norm() / std::sqrt(static_cast<double>(n)) : robust_.effective_omega();
  IndexSet support = support_estimate(cs.x, missing, omega);
  return fill_and_advance(y, support, std::move(cs.x), cs.converged, missing);
}

RobustFrame RobustTracker::step_with_support(const Vector& y, const IndexSet& missing, const IndexSet& support) {
  if (!missing.is_subset_of(support)) throw std::invalid_argument("step_with_support: support must contain the missing set");
  return fill_and_advance(y, support, Vector::Zero(y.size()), true, missing);
}

RobustFrame RobustTracker::fill_and_advance(const Vector& y, const IndexSet& support, Vector x_cs, bool cs_ok,
                                            const IndexSet& missing) {
  RobustFrame out;
  out.cs_converged = cs_ok;
  Vector ell;
  bool failed = false;
  try {
    ell = project_ls_fill(y, support, tracker_.basis(), tracker_.params().fill).ell_hat;
  } catch (const IllConditioned&) {
    ell = y;
    failed = true;
  }
  out.frame = tracker_.advance(y, missing, std::move(ell), failed);
  out.sparse.x_cs = std::move(x_cs);
  out.sparse.support = support;
  return out;
}

RobustRun run_robust(const ObservationStream& stream, const TrackerParams& params, const RobustParams& robust) {
  robust.validate(params.r);
  const Index n = stream.n;
  const Index d = stream.d;
  if (robust.t_train > d) throw std::invalid_argument("run_robust: t_train exceeds the stream length");
  if (static_cast<Index>(stream.missing.size()) != d || stream.y.cols() != d || stream.y.rows() != n) {
    throw ShapeMismatch("run_robust: stream shape inconsistent");
  }
  RobustRun run;
  run.online.resize(n, d);
  run.supports.reserve(static_cast<std::size_t>(d));
  run.bases.reserve(static_cast<std::size_t>(d));

  Matrix y_train = stream.y.leftCols(robust.t_train);
  for (Index t = 0; t < robust.t_train; ++t) {
    for (Index i : stream.missing[static_cast<std::size_t>(t)]) y_train(i, t) = robust.train_fill;
  }
  run.init = altproj_init(y_train, params.r, robust.altproj_iters, robust.altproj_tol, params.svd);
  auto p0 = std::make_shared<const BasisMatrix>(run.init.basis);
  for (Index t = 0; t < robust.t_train; ++t) {
    const IndexSet& miss = stream.missing[static_cast<std::size_t>(t)];
    std::vector<Index> idx(miss.begin(), miss.end());
    for (Index i = 0; i < n; ++i) {
      if (std::abs(run.init.sparse(i, t)) > robust.effective_omega()) idx.push_back(i);
    }
    run.supports.emplace_back(std::move(idx), n);
    run.online.col(t) = run.init.low_rank.col(t);
    run.bases.push_back(p0);
  }

  RobustTracker tracker(n, params, robust, run.init.basis);
  for (Index t = robust.t_train; t < d; ++t) {
    RobustFrame fr = tracker.step(stream.y.col(t), stream.missing[static_cast<std::size_t>(t)]);
    if (!fr.cs_converged) ++run.cs_failures;
    run.online.col(t) = fr.frame.ell_hat;
    run.supports.push_back(std::move(fr.sparse.support));
    run.bases.push_back(std::move(fr.frame.basis));
  }
  tracker.finish();
  run.state = tracker.tracker().state();
  run.completed = smooth(stream.y, run.supports, run.state, params.fill, params.project_smoothed);
  return run;
}

}  // namespace norst
