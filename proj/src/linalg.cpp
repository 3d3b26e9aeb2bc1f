#include "norst/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace norst {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Thin orthonormal factor of a (possibly rank-deficient) matrix.
Matrix thin_q(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

// Extends the first `have` orthonormal columns of q to a full orthonormal set
// by Gram-Schmidt on canonical vectors.
void complete_orthonormal(Matrix& q, Index have) {
  const Index n = q.rows();
  Index next = have;
  for (Index e = 0; e < n && next < q.cols(); ++e) {
    Vector v = Vector::Unit(n, e);
    for (int pass = 0; pass < 2; ++pass) {
      v -= q.leftCols(next) * (q.leftCols(next).transpose() * v);
    }
    const double nv = v.norm();
    if (nv > 1e-8) q.col(next++) = v / nv;
  }
}

}  // namespace

// ---------------------------------------------------------------- IndexSet

IndexSet::IndexSet(std::vector<Index> indices, Index n) : idx_(std::move(indices)) {
  std::sort(idx_.begin(), idx_.end());
  idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
  if (!idx_.empty() && (idx_.front() < 0 || idx_.back() >= n)) {
    throw std::out_of_range("IndexSet: index outside [0, " + std::to_string(n) + ")");
  }
}

IndexSet::IndexSet(std::initializer_list<Index> indices, Index n)
    : IndexSet(std::vector<Index>(indices), n) {}

IndexSet IndexSet::all(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  IndexSet s;
  s.idx_ = std::move(v);
  return s;
}

bool IndexSet::contains(Index i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }

IndexSet IndexSet::complement(Index n) const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n - size()));
  auto it = idx_.begin();
  for (Index i = 0; i < n; ++i) {
    if (it != idx_.end() && *it == i) {
      ++it;
    } else {
      out.push_back(i);
    }
  }
  IndexSet s;
  s.idx_ = std::move(out);
  return s;
}

IndexSet IndexSet::united(const IndexSet& other, Index n) const {
  std::vector<Index> out;
  out.reserve(idx_.size() + other.idx_.size());
  std::set_union(idx_.begin(), idx_.end(), other.idx_.begin(), other.idx_.end(), std::back_inserter(out));
  if (!out.empty() && out.back() >= n) throw std::out_of_range("IndexSet::united: index outside range");
  IndexSet s;
  s.idx_ = std::move(out);
  return s;
}

bool IndexSet::intersects(const IndexSet& other) const {
  auto a = idx_.begin();
  auto b = other.idx_.begin();
  while (a != idx_.end() && b != other.idx_.end()) {
    if (*a == *b) return true;
    if (*a < *b) {
      ++a;
    } else {
      ++b;
    }
  }
  return false;
}

bool IndexSet::is_subset_of(const IndexSet& other) const {
  return std::includes(other.idx_.begin(), other.idx_.end(), idx_.begin(), idx_.end());
}

// ------------------------------------------------------------- BasisMatrix

double orthonormality_error(const Matrix& q) {
  if (q.cols() == 0) return 0.0;
  return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

BasisMatrix::BasisMatrix(Matrix columns) : q_(std::move(columns)) {
  if (q_.cols() > q_.rows()) throw RankDeficient("BasisMatrix: more columns than rows");
  const double err = orthonormality_error(q_);
  if (!(err <= kOrthoTol)) {
    throw RankDeficient("BasisMatrix: columns not orthonormal (error " + std::to_string(err) + ")");
  }
}

BasisMatrix BasisMatrix::zero(Index n) {
  BasisMatrix b;
  b.q_ = Matrix(n, 0);
  return b;
}

BasisMatrix BasisMatrix::trusted(Matrix columns) {
  BasisMatrix b;
  b.q_ = std::move(columns);
  return b;
}

Vector BasisMatrix::project_out(const Vector& v) const {
  if (q_.cols() == 0) return v;
  return v - q_ * (q_.transpose() * v);
}

Matrix BasisMatrix::project_out(const Matrix& m) const {
  if (q_.cols() == 0) return m;
  return m - q_ * (q_.transpose() * m);
}

// ---------------------------------------------------------- decompositions

SmallSvd jacobi_svd(const Matrix& a, int max_sweeps) {
  // One-sided (Hestenes) Jacobi: rotate column pairs of w until mutually
  // orthogonal. For a tall input the normalized columns are the left singular
  // vectors. A wide input is handled through its transpose, where the
  // accumulated rotations carry the left singular vectors instead.
  const bool wide = a.rows() < a.cols();
  Matrix w = wide ? Matrix(a.transpose()) : a;
  const Index m = w.rows();
  const Index n = w.cols();
  Matrix v = wide ? Matrix::Identity(n, n) : Matrix(0, 0);
  Vector norms2(n);
  for (Index j = 0; j < n; ++j) norms2(j) = w.col(j).squaredNorm();
  // Columns at roundoff level carry no direction; rotating them never settles.
  const double floor2 = std::pow(kEps * static_cast<double>(std::max(m, n)) *
                                     std::sqrt(std::max(norms2.size() ? norms2.maxCoeff() : 0.0, 0.0)),
                                 2);

  bool done = false;
  for (int sweep = 0; sweep < max_sweeps && !done; ++sweep) {
    done = true;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double alpha = norms2(p);
        const double beta = norms2(q);
        if (alpha <= floor2 || beta <= floor2) continue;
        const double gamma = w.col(p).dot(w.col(q));
        if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        done = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index i = 0; i < m; ++i) {
          const double wp = w(i, p);
          const double wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        if (wide) {
          for (Index i = 0; i < n; ++i) {
            const double vp = v(i, p);
            const double vq = v(i, q);
            v(i, p) = c * vp - s * vq;
            v(i, q) = s * vp + c * vq;
          }
        }
        norms2(p) = w.col(p).squaredNorm();
        norms2(q) = w.col(q).squaredNorm();
      }
    }
  }
  if (!done) throw NoConvergence("jacobi_svd: sweep cap reached");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return norms2(x) > norms2(y); });

  const Index rows = a.rows();
  const Index k = std::min(a.rows(), a.cols());
  SmallSvd out;
  out.u = Matrix::Zero(rows, k);
  out.s = Vector::Zero(k);
  const double smax = n > 0 ? std::sqrt(norms2(order[0])) : 0.0;
  Index good = 0;
  for (Index j = 0; j < k; ++j) {
    const Index col = order[static_cast<std::size_t>(j)];
    const double sj = std::sqrt(norms2(col));
    out.s(j) = sj;
    if (wide) {
      out.u.col(j) = v.col(col);
      ++good;
    } else if (sj > 0.0 && sj > smax * kEps * static_cast<double>(std::max(m, n)) && good == j) {
      out.u.col(j) = w.col(col) / sj;
      ++good;
    }
  }
  if (good < k) complete_orthonormal(out.u, good);
  return out;
}

SymmetricEigen symmetric_eigen(const Matrix& m, int max_sweeps) {
  if (m.rows() != m.cols()) throw DimensionMismatch("symmetric_eigen: matrix not square");
  const Index n = m.rows();
  Matrix a = m;
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

  bool done = n <= 1;
  for (int sweep = 0; sweep < max_sweeps && !done; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    }
    if (off <= kEps * scale * 1e-3) {
      done = true;
      break;
    }
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= kEps * 1e-3 * scale) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!done) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    }
    if (off > 1e-12 * scale) throw NoConvergence("symmetric_eigen: sweep cap reached");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    out.values(j) = a(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(j)]);
    out.vectors.col(j) = v.col(order[static_cast<std::size_t>(j)]);
  }
  return out;
}

double lambda_max_sym(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("lambda_max_sym: matrix not square");
  if (m.size() == 0) return 0.0;
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("lambda_max_sym: matrix not symmetric");
  }
  return symmetric_eigen(m).values(0);
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Matrix g = m.cols() <= m.rows() ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
  return std::sqrt(std::max(0.0, symmetric_eigen(g).values(0)));
}

// ----------------------------------------------------------------- bases

BasisMatrix orthonormalize(const Matrix& m) {
  if (m.rows() < 1 || m.cols() < 1) throw DimensionMismatch("orthonormalize: empty matrix");
  if (m.cols() > m.rows()) throw RankDeficient("orthonormalize: more columns than rows");
  const SmallSvd sv = jacobi_svd(m);
  const double smax = sv.s(0);
  const double smin = sv.s(sv.s.size() - 1);
  if (!(smax > 0.0) || !(smin > 1e-12 * smax)) {
    throw RankDeficient("orthonormalize: smallest singular value " + std::to_string(smin) +
                        " below 1e-12 of largest " + std::to_string(smax));
  }
  return BasisMatrix(thin_q(m));
}

TruncatedSvd r_svd(const Matrix& m, Index r, const SvdOptions& opts) {
  const Index full = std::min(m.rows(), m.cols());
  if (r < 1 || r > full) throw std::invalid_argument("r_svd: r must be in [1, min(rows, cols)]");
  const Index block = std::min(full, r + std::max<Index>(opts.oversample, 0));

  TruncatedSvd out;
  // Thin input: m = Q R exactly, and the SVD of the small R factor gives the
  // left singular vectors without any iteration.
  if (m.cols() <= m.rows() && m.cols() <= 2 * block) {
    Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix rf = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    const SmallSvd sv = jacobi_svd(rf);
    Matrix coef = Matrix::Zero(m.rows(), r);
    coef.topRows(m.cols()) = sv.u.leftCols(r);
    out.basis = BasisMatrix::trusted(qr.householderQ() * coef);
    out.values = sv.s.head(r);
    out.iterations = 1;
    return out;
  }

  std::mt19937_64 gen(opts.seed);
  std::normal_distribution<double> normal;
  Matrix start(m.cols(), block);
  for (Index j = 0; j < block; ++j) {
    for (Index i = 0; i < m.cols(); ++i) start(i, j) = normal(gen);
  }
  Matrix x = thin_q(m * start);

  Matrix prev;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Matrix c = x.transpose() * m;
    const SmallSvd sv = jacobi_svd(c);
    Matrix u = x * sv.u.leftCols(r);
    out.values = sv.s.head(r);
    out.iterations = it;
    // A block spanning the whole range of m makes Rayleigh-Ritz exact.
    if (block == full) {
      out.basis = BasisMatrix::trusted(std::move(u));
      return out;
    }
    if (it > 1) {
      // Directions past the numerical rank are arbitrary and never settle.
      Index live = 0;
      while (live < r && sv.s(live) > 1e-12 * sv.s(0)) ++live;
      const Matrix ul = u.leftCols(live);
      const double change =
          live == 0 ? 0.0 : std::min(1.0, spectral_norm(Matrix(ul - prev * (prev.transpose() * ul))));
      if (change <= opts.tol) {
        out.basis = BasisMatrix::trusted(std::move(u));
        return out;
      }
    }
    prev = std::move(u);
    x = thin_q(m * (m.transpose() * x));
  }
  throw NoConvergence("r_svd: no convergence after " + std::to_string(opts.max_iter) + " iterations");
}

CglsResult cgls_solve(const LinearOperator& a, const Vector& b, double tol, int max_iter) {
  if (b.size() != a.rows) throw DimensionMismatch("cgls_solve: rhs length does not match operator rows");
  if (!(tol > 0.0)) throw std::invalid_argument("cgls_solve: tol must be positive");
  const double eff_tol = std::max(tol, kEps);

  CglsResult res;
  res.x = Vector::Zero(a.cols);
  Vector r = b;
  Vector s(a.cols);
  a.apply_adjoint(r, s);
  const double s0 = s.norm();
  if (s0 == 0.0) {
    res.converged = true;
    return res;
  }
  Vector p = s;
  Vector q(a.rows);
  double gamma = s.squaredNorm();
  for (int it = 1; it <= max_iter; ++it) {
    a.apply(p, q);
    const double qq = q.squaredNorm();
    if (qq == 0.0) break;
    const double step = gamma / qq;
    res.x.noalias() += step * p;
    r.noalias() -= step * q;
    a.apply_adjoint(r, s);
    const double gamma_next = s.squaredNorm();
    res.iterations = it;
    res.normal_residual = std::sqrt(gamma_next) / s0;
    if (res.normal_residual <= eff_tol) {
      res.converged = true;
      return res;
    }
    p = s + (gamma_next / gamma) * p;
    gamma = gamma_next;
  }
  return res;
}

double sin_theta_max(const BasisMatrix& p1, const BasisMatrix& p2) {
  if (p1.ambient_dim() != p2.ambient_dim()) {
    throw DimensionMismatch("sin_theta_max: ambient dimensions differ");
  }
  if (p2.rank() == 0) return 0.0;
  const Matrix resid = p1.project_out(p2.matrix());
  return std::min(1.0, spectral_norm(resid));
}

double mu_coherence(const BasisMatrix& p) {
  if (p.rank() == 0) return 0.0;
  const double max_row = p.matrix().rowwise().squaredNorm().maxCoeff();
  return static_cast<double>(p.ambient_dim()) / static_cast<double>(p.rank()) * max_row;
}

Matrix skew_expm(const Matrix& b, double gamma) {
  if (b.rows() != b.cols()) throw DimensionMismatch("skew_expm: matrix not square");
  const double skew_err = b.size() ? (b + b.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (skew_err > 1e-12) throw NotSkewSymmetric("skew_expm: ||B + B'||_max = " + std::to_string(skew_err));

  const Index n = b.rows();
  const Matrix ident = Matrix::Identity(n, n);
  Matrix a = gamma * b;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 == 0.0) return ident;

  // Pade(13) coefficients and threshold from Higham's scaling-and-squaring.
  static constexpr double c[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;
  int squarings = 0;
  if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  a /= std::ldexp(1.0, squarings);

  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  Matrix inner = c[13] * a6 + c[11] * a4 + c[9] * a2;
  Matrix u_arg = a6 * inner + c[7] * a6 + c[5] * a4 + c[3] * a2 + c[1] * ident;
  const Matrix u = a * u_arg;
  inner = c[12] * a6 + c[10] * a4 + c[8] * a2;
  const Matrix v = a6 * inner + c[6] * a6 + c[4] * a4 + c[2] * a2 + c[0] * ident;

  Matrix result = Eigen::PartialPivLU<Matrix>(v - u).solve(v + u);
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

}  // namespace norst
