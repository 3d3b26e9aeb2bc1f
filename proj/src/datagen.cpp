#include "norst/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "norst/rng.hpp"

namespace norst {

std::size_t GroundTruth::subspace_index(Index t) const {
  if (t < 1 || t > d) throw std::out_of_range("GroundTruth::subspace_index: t outside [1, d]");
  const auto it = std::upper_bound(change_times.begin(), change_times.end(), t);
  return static_cast<std::size_t>(it - change_times.begin());
}

// ------------------------------------------------------------ coefficients

std::vector<double> CoefficientSpec::half_widths() const {
  if (r < 1 || !(f >= 1.0)) throw std::invalid_argument("CoefficientSpec: need r >= 1 and f >= 1");
  std::vector<double> q(static_cast<std::size_t>(r));
  const double sf = std::sqrt(f);
  for (Index i = 1; i < r; ++i) {
    q[static_cast<std::size_t>(i - 1)] = sf - sf * static_cast<double>(i - 1) / (2.0 * static_cast<double>(r));
  }
  q.back() = 1.0;
  return q;
}

std::vector<double> CoefficientSpec::half_widths_at(Index t) const {
  std::vector<double> q = half_widths();
  if (!alternating) return q;
  const double shift = (t % 2 == 1 ? 0.5 : -0.5) * lambda_min();
  for (std::size_t i = 0; i + 1 < q.size(); ++i) q[i] += shift;
  return q;
}

std::vector<double> CoefficientSpec::variances() const {
  std::vector<double> q = half_widths();
  for (double& v : q) v = v * v / 3.0;
  return q;
}

double CoefficientSpec::lambda_min() const {
  const auto v = variances();
  return *std::min_element(v.begin(), v.end());
}

double CoefficientSpec::lambda_max() const {
  const auto v = variances();
  return *std::max_element(v.begin(), v.end());
}

Matrix gen_coefficients(const CoefficientSpec& spec, Index d, std::uint64_t seed) {
  Rng gen = make_rng(seed, Stream::kCoefficients);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Matrix a(spec.r, d);
  const std::vector<double> base = spec.half_widths();
  for (Index t = 1; t <= d; ++t) {
    const std::vector<double> q = spec.alternating ? spec.half_widths_at(t) : base;
    for (Index i = 0; i < spec.r; ++i) a(i, t - 1) = q[static_cast<std::size_t>(i)] * unit(gen);
  }
  return a;
}

// --------------------------------------------------------------- subspaces

std::vector<BasisMatrix> gen_subspaces(Index n, Index r, Index changes, double gamma, std::uint64_t seed) {
  if (r < 1 || r > n) throw std::invalid_argument("gen_subspaces: need 1 <= r <= n");
  if (changes < 0 || gamma < 0.0) throw std::invalid_argument("gen_subspaces: need J >= 0 and gamma >= 0");
  Rng gen = make_rng(seed, Stream::kSubspaceInit);
  std::normal_distribution<double> normal;
  Matrix g(n, r);
  for (Index j = 0; j < r; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = normal(gen);
  }
  std::vector<BasisMatrix> out;
  out.push_back(orthonormalize(g));
  for (Index j = 1; j <= changes; ++j) {
    if (gamma == 0.0) {
      out.push_back(out.back());
      continue;
    }
    Rng rot = make_rng(seed, Stream::kSubspaceRotation, static_cast<std::uint64_t>(j));
    Matrix bt(n, n);
    for (Index c = 0; c < n; ++c) {
      for (Index i = 0; i < n; ++i) bt(i, c) = normal(rot);
    }
    const Matrix b = bt - bt.transpose();
    out.push_back(orthonormalize(skew_expm(b, gamma) * out.back().matrix()));
  }
  return out;
}

// ---------------------------------------------------------------- supports

std::vector<IndexSet> gen_bernoulli_supports(Index n, Index d, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("gen_bernoulli_supports: rho must be in (0, 1]");
  Rng gen = make_rng(seed, Stream::kMissing);
  std::bernoulli_distribution missing(1.0 - rho);
  std::vector<IndexSet> out;
  out.reserve(static_cast<std::size_t>(d));
  std::vector<Index> idx;
  for (Index t = 0; t < d; ++t) {
    idx.clear();
    for (Index i = 0; i < n; ++i) {
      if (missing(gen)) idx.push_back(i);
    }
    out.emplace_back(idx, n);
  }
  return out;
}

std::vector<IndexSet> gen_moving_object_supports(Index n, Index d, Index s, double b0, std::uint64_t seed,
                                                 std::optional<Index> start) {
  if (s < 1 || s >= n) throw std::invalid_argument("gen_moving_object_supports: need 1 <= s < n");
  if (!(b0 > 0.0 && b0 <= 1.0)) throw std::invalid_argument("gen_moving_object_supports: b0 must be in (0, 1]");
  const auto step = static_cast<Index>(std::ceil(static_cast<double>(s) * b0 - 1e-12));
  Index pos = 0;
  if (start) {
    pos = ((*start % n) + n) % n;
  } else {
    Rng gen = make_rng(seed, Stream::kMissing);
    pos = std::uniform_int_distribution<Index>(0, n - 1)(gen);
  }
  std::vector<IndexSet> out;
  out.reserve(static_cast<std::size_t>(d));
  std::vector<Index> idx(static_cast<std::size_t>(s));
  for (Index t = 0; t < d; ++t) {
    for (Index k = 0; k < s; ++k) idx[static_cast<std::size_t>(k)] = (pos + k) % n;
    out.emplace_back(idx, n);
    pos = (pos + step) % n;
  }
  return out;
}

std::vector<IndexSet> gen_supports(const SupportModel& model, Index n, Index d, std::uint64_t seed,
                                   std::uint64_t stream_counter) {
  const std::uint64_t sub = stream_counter == 0 ? seed : splitmix64(seed + stream_counter);
  return std::visit(
      [&](const auto& m) -> std::vector<IndexSet> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BernoulliSupport>) {
          return gen_bernoulli_supports(n, d, m.rho, sub);
        } else if constexpr (std::is_same_v<T, MovingObjectSupport>) {
          return gen_moving_object_supports(n, d, m.s, m.b0, sub, m.start);
        } else {
          if (static_cast<Index>(m.sets.size()) != d) {
            throw ShapeMismatch("ReplaySupport: expected " + std::to_string(d) + " sets");
          }
          return m.sets;
        }
      },
      model);
}

std::vector<SparseFrame> gen_outliers(Index n, Index d, const OutlierSpec& spec,
                                      const std::vector<IndexSet>& missing, std::uint64_t seed) {
  if (!(spec.x_min > 0.0 && spec.x_min <= spec.x_max)) {
    throw std::invalid_argument("gen_outliers: need 0 < x_min <= x_max");
  }
  if (static_cast<Index>(missing.size()) != d) throw ShapeMismatch("gen_outliers: missing supports length != d");
  const std::vector<IndexSet> raw = gen_supports(spec.support, n, d, seed, static_cast<std::uint64_t>(Stream::kOutlierSupport));
  Rng gen = make_rng(seed, Stream::kOutlierValues);
  std::uniform_real_distribution<double> mag(spec.x_min, spec.x_max);
  std::bernoulli_distribution sign(0.5);

  std::vector<SparseFrame> out(static_cast<std::size_t>(d));
  for (Index t = 0; t < d; ++t) {
    const IndexSet& miss = missing[static_cast<std::size_t>(t)];
    IndexSet supp = raw[static_cast<std::size_t>(t)];
    if (spec.collision == CollisionPolicy::kMask) {
      std::vector<Index> keep;
      for (Index i : supp) {
        if (!miss.contains(i)) keep.push_back(i);
      }
      supp = IndexSet(std::move(keep), n);
    } else {
      Index shift = 0;
      IndexSet moved = supp;
      while (moved.intersects(miss) && ++shift < n) {
        std::vector<Index> v;
        for (Index i : supp) v.push_back((i + shift) % n);
        moved = IndexSet(std::move(v), n);
      }
      if (moved.intersects(miss)) {
        std::vector<Index> keep;
        for (Index i : moved) {
          if (!miss.contains(i)) keep.push_back(i);
        }
        moved = IndexSet(std::move(keep), n);
      }
      supp = std::move(moved);
    }
    SparseFrame& f = out[static_cast<std::size_t>(t)];
    f.values.reserve(static_cast<std::size_t>(supp.size()));
    for (Index k = 0; k < supp.size(); ++k) {
      double v = mag(gen);
      if (spec.random_sign && sign(gen)) v = -v;
      f.values.push_back(v);
    }
    f.support = std::move(supp);
  }
  return out;
}

// ----------------------------------------------------------------- assembly

GroundTruth make_ground_truth(Index n, Index d, const CoefficientSpec& coeffs, Index changes, Index period,
                              double gamma, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("make_ground_truth: d must be positive");
  GroundTruth g;
  g.n = n;
  g.d = d;
  g.r = coeffs.r;
  g.subspaces = gen_subspaces(n, coeffs.r, changes, gamma, seed);
  if (period <= 0 && changes > 0) period = d / (changes + 1);
  for (Index j = 1; j <= changes; ++j) {
    const Index tj = j * period + 1;
    if (tj > d) throw std::invalid_argument("make_ground_truth: change time beyond d");
    if (!g.change_times.empty() && tj - g.change_times.back() < coeffs.r) {
      throw std::invalid_argument("make_ground_truth: changes closer than r frames");
    }
    g.change_times.push_back(tj);
  }
  g.coefficients = gen_coefficients(coeffs, d, seed);
  g.clean.resize(n, d);
  Index t = 1;
  for (std::size_t j = 0; j < g.subspaces.size(); ++j) {
    const Index end = j < g.change_times.size() ? g.change_times[j] : d + 1;
    const Index len = end - t;
    if (len > 0) {
      g.clean.middleCols(t - 1, len).noalias() = g.subspaces[j].matrix() * g.coefficients.middleCols(t - 1, len);
    }
    t = end;
  }
  return g;
}

ObservationStream assemble_stream(const GroundTruth& truth, const std::vector<IndexSet>& missing,
                                  const std::optional<std::vector<SparseFrame>>& outliers, double noise_std,
                                  std::uint64_t seed) {
  const Index n = truth.n;
  const Index d = truth.d;
  if (truth.clean.rows() != n || truth.clean.cols() != d) throw ShapeMismatch("assemble_stream: clean matrix shape");
  if (static_cast<Index>(missing.size()) != d) throw ShapeMismatch("assemble_stream: missing supports length != d");
  if (outliers && static_cast<Index>(outliers->size()) != d) throw ShapeMismatch("assemble_stream: outliers length != d");
  if (noise_std < 0.0) throw std::invalid_argument("assemble_stream: noise_std must be >= 0");

  ObservationStream s;
  s.n = n;
  s.d = d;
  s.y = truth.clean;
  s.missing = missing;
  s.outliers = outliers;
  Rng gen = make_rng(seed, Stream::kNoise);
  std::normal_distribution<double> normal(0.0, noise_std > 0.0 ? noise_std : 1.0);
  for (Index t = 0; t < d; ++t) {
    const IndexSet& miss = missing[static_cast<std::size_t>(t)];
    if (outliers) {
      const SparseFrame& f = (*outliers)[static_cast<std::size_t>(t)];
      for (Index k = 0; k < f.support.size(); ++k) s.y(f.support[k], t) += f.values[static_cast<std::size_t>(k)];
    }
    if (noise_std > 0.0) {
      for (Index i = 0; i < n; ++i) s.y(i, t) += normal(gen);
    }
    for (Index i : miss) s.y(i, t) = 0.0;
  }
  return s;
}

MissFracStats miss_frac_stats(const std::vector<IndexSet>& supports, Index n, Index alpha) {
  const auto d = static_cast<Index>(supports.size());
  if (alpha < 1 || alpha > d) throw std::invalid_argument("miss_frac_stats: need 1 <= alpha <= d");
  MissFracStats st;
  for (const auto& s : supports) st.col = std::max(st.col, static_cast<double>(s.size()) / static_cast<double>(n));
  std::vector<Index> count(static_cast<std::size_t>(n), 0);
  Index worst = 0;
  for (Index t = 0; t < d; ++t) {
    for (Index i : supports[static_cast<std::size_t>(t)]) ++count[static_cast<std::size_t>(i)];
    if (t >= alpha) {
      for (Index i : supports[static_cast<std::size_t>(t - alpha)]) --count[static_cast<std::size_t>(i)];
    }
    if (t + 1 >= alpha) worst = std::max(worst, *std::max_element(count.begin(), count.end()));
  }
  st.row_alpha = static_cast<double>(worst) / static_cast<double>(alpha);
  return st;
}

}  // namespace norst
