#include "doctest.h"
#include "norst/metrics.hpp"
#include "norst/robust.hpp"
#include "oracles.hpp"

using namespace norst;
using norst::testing::gaussian;

TEST_CASE("modified_cs basics") {
  const BasisMatrix p = orthonormalize(gaussian(60, 3, 1));
  const CsResult zero = modified_cs(Vector::Zero(60), p, IndexSet{}, 0.5);
  CHECK(zero.x.isZero());

  SUBCASE("single large outlier") {
    Vector x = Vector::Zero(60);
    x(17) = 20.0;
    const Vector y_tilde = p.project_out(x);
    const double xi = 0.1;
    const CsResult r = modified_cs(y_tilde, p, IndexSet{}, xi);
    CHECK(r.residual <= xi * 1.001);
    CHECK(std::abs(r.x(17) - 20.0) <= 2.0);
    Vector rest = r.x;
    rest(17) = 0.0;
    CHECK(rest.lpNorm<1>() <= 1.0);
    CHECK(support_estimate(r.x, IndexSet{}, 5.0) == IndexSet({17}, 60));
  }
  SUBCASE("signal on the known support is absorbed without penalty") {
    const IndexSet known({3, 8, 40}, 60);
    Vector x = Vector::Zero(60);
    x(3) = 4.0;
    x(8) = -2.0;
    x(40) = 1.0;
    const Vector y_tilde = p.project_out(x);
    const CsResult r = modified_cs(y_tilde, p, known, 1e-6);
    Vector off = r.x;
    for (Index i : known) off(i) = 0.0;
    CHECK(off.lpNorm<1>() <= 1e-9);
    CHECK((r.x - x).norm() <= 1e-4);
  }
}

TEST_CASE("modified_cs keeps the residual bound") {
  for (int trial = 0; trial < 20; ++trial) {
    const BasisMatrix p = orthonormalize(gaussian(80, 4, 100 + trial));
    Vector x = Vector::Zero(80);
    for (int k = 0; k < 4; ++k) x((trial * 7 + k * 13) % 80) = 10.0 + k;
    const Vector y_tilde = p.project_out(Vector(x + 0.01 * gaussian(80, 1, 200 + trial).col(0)));
    const CsResult r = modified_cs(y_tilde, p, IndexSet{}, 0.5);
    CHECK(r.residual <= 0.5 * 1.001);
  }
}

TEST_CASE("support_estimate") {
  const IndexSet known({1, 2}, 6);
  CHECK(support_estimate(Vector::Zero(6), known, 5.0) == known);
  Vector x = Vector::Zero(6);
  x(4) = 12.0;
  x(5) = 0.1;
  CHECK(support_estimate(x, known, 5.0) == IndexSet({1, 2, 4}, 6));
}

TEST_CASE("altproj_init") {
  const Index n = 120, t = 200, r = 3;
  const BasisMatrix p = orthonormalize(gaussian(n, r, 5));
  const Matrix l = p.matrix() * gaussian(r, t, 6) * 3.0;

  SUBCASE("clean input gives the exact subspace") {
    const AltProjResult res = altproj_init(l, r, 500, 1e-10);
    CHECK(res.converged);
    CHECK(sin_theta_max(res.basis, p) <= 1e-8);
  }
  SUBCASE("sparse bounded outliers") {
    Matrix y = l;
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> mag(10.0, 25.0);
    for (Index j = 0; j < t; ++j) {
      const Index start = static_cast<Index>(gen() % static_cast<std::uint64_t>(n));
      for (Index k = 0; k < 6; ++k) y((start + k) % n, j) += mag(gen);
    }
    const AltProjResult res = altproj_init(y, r);
    CHECK(sin_theta_max(res.basis, p) <= 0.25);
  }
  SUBCASE("huge sign-symmetric outliers are removed") {
    Matrix y = l;
    std::mt19937_64 gen(8);
    for (Index k = 0; k < n * t / 100; ++k) {
      y(static_cast<Index>(gen() % n), static_cast<Index>(gen() % t)) = (gen() % 2 ? 1e6 : -1e6);
    }
    const AltProjResult res = altproj_init(y, r, 500, 1e-10);
    CHECK(sin_theta_max(res.basis, p) <= 1e-6);
  }
}

TEST_CASE("robust tracker with oracle supports reproduces the plain tracker") {
  const Index n = 100, d = 400, r = 3;
  const GroundTruth g = make_ground_truth(n, d, CoefficientSpec{r, 4.0}, 0, 0, 0.0, 11);
  const auto miss = gen_bernoulli_supports(n, d, 0.9, 11);
  const ObservationStream s = assemble_stream(g, miss, std::nullopt, 0.0, 11);
  TrackerParams p;
  p.r = r;
  p.K = 5;
  p.alpha = 10;
  p.omega_evals = 1e-4;
  RobustParams rp;
  rp.t_train = 50;
  const BasisMatrix p0 = r_svd(g.clean.leftCols(50), r).basis;

  Tracker plain(n, p, p0, rp.t_train + 1);
  RobustTracker robust(n, p, rp, p0);
  double worst = 0.0;
  for (Index t = rp.t_train; t < d; ++t) {
    const Vector y = s.y.col(t);
    const auto& m = miss[static_cast<std::size_t>(t)];
    const FrameOutput a = plain.step(y, m);
    const RobustFrame b = robust.step_with_support(y, m, m);
    worst = std::max(worst, (a.ell_hat - b.frame.ell_hat).cwiseAbs().maxCoeff());
    REQUIRE(a.events == b.frame.events);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("robust run on a small outlier stream") {
  const Index n = 300, d = 700, r = 3;
  const GroundTruth g = make_ground_truth(n, d, CoefficientSpec{r, 4.0}, 0, 0, 0.0, 12);
  const auto miss = gen_bernoulli_supports(n, d, 0.9, 12);
  OutlierSpec os;
  os.support = MovingObjectSupport{15, 0.05, std::nullopt};
  const auto out = gen_outliers(n, d, os, miss, 12);
  const ObservationStream s = assemble_stream(g, miss, out, 0.0, 12);
  TrackerParams p;
  p.r = r;
  p.K = 8;
  p.alpha = 12;
  p.omega_evals = 8e-4 * CoefficientSpec{r, 4.0}.lambda_min();
  RobustParams rp;
  rp.t_train = 150;
  const RobustRun run = run_robust(s, p, rp);
  CHECK(rel_frobenius(run.completed, g.clean) <= 0.05);
  Index contained = 0;
  for (Index t = 0; t < d; ++t) {
    CHECK(miss[static_cast<std::size_t>(t)].is_subset_of(run.supports[static_cast<std::size_t>(t)]));
    if (t >= rp.t_train && out[static_cast<std::size_t>(t)].support.is_subset_of(run.supports[static_cast<std::size_t>(t)])) {
      ++contained;
    }
  }
  CHECK(static_cast<double>(contained) >= 0.9 * static_cast<double>(d - rp.t_train));
}
