#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "norst/metrics.hpp"
#include "oracles.hpp"

using namespace norst;
using norst::testing::gaussian;

namespace {

ErrorSeries series_from(const std::vector<double>& errs) {
  ErrorSeries s;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    ErrorRecord r;
    r.t = static_cast<Index>(i) + 1;
    r.sin_theta = errs[i];
    s.records.push_back(r);
  }
  return s;
}

}  // namespace

TEST_CASE("samples_to_threshold") {
  CHECK(samples_to_threshold(series_from(std::vector<double>(200, 1e-20)), 1e-13, 60) == 60);

  std::vector<double> errs(400);
  for (std::size_t i = 0; i < errs.size(); ++i) errs[i] = i < 100 ? 1.0 : 1e-15;
  CHECK(samples_to_threshold(series_from(errs), 1e-13, 60) == 160);

  // A dip shorter than alpha does not count.
  errs.assign(400, 1.0);
  for (std::size_t i = 50; i < 70; ++i) errs[i] = 0.0;
  for (std::size_t i = 300; i < 400; ++i) errs[i] = 0.0;
  CHECK(samples_to_threshold(series_from(errs), 1e-13, 60) == 360);
  CHECK(!samples_to_threshold(series_from(std::vector<double>(50, 1.0)), 1e-13, 60));
}

TEST_CASE("rel_frobenius") {
  const Matrix l = gaussian(10, 8, 1);
  CHECK(rel_frobenius(l, l) == 0.0);
  CHECK(rel_frobenius(Matrix::Zero(10, 8), l) == doctest::Approx(1.0));
  Matrix e = gaussian(10, 8, 2);
  e *= 0.1 * l.norm() / e.norm();
  CHECK(rel_frobenius(l + e, l) == doctest::Approx(0.1));
  CHECK_THROWS_AS(rel_frobenius(l, Matrix::Zero(10, 8)), ZeroMatrix);
  CHECK_THROWS_AS(rel_frobenius(l, Matrix::Zero(10, 7)), ShapeMismatch);

  // Column-sum oracle.
  double sq = 0.0;
  for (Index j = 0; j < 8; ++j) sq += (e.col(j)).squaredNorm();
  CHECK(rel_frobenius(l + e, l) == doctest::Approx(std::sqrt(sq) / l.norm()));
}

TEST_CASE("detection_report") {
  const std::vector<Index> changes{401};
  std::vector<Event> ev{{420, EventKind::kChangeDetected, 1, 0, 3.0}};
  DetectionReport rep = detection_report(ev, changes, 60);
  CHECK(rep.detections == std::vector<Index>{420});
  REQUIRE(rep.delays.size() == 1);
  CHECK(*rep.delays[0] == 19);
  CHECK(rep.false_alarms.empty());
  CHECK(rep.misses == 0);

  const DetectionReport empty = detection_report({}, {}, 60);
  CHECK(empty.detections.empty());
  CHECK(empty.false_alarms.empty());
  CHECK(empty.misses == 0);

  ev.push_back({100, EventKind::kChangeDetected, 2, 0, 1.0});
  ev.push_back({900, EventKind::kChangeDetected, 3, 0, 1.0});
  rep = detection_report(ev, changes, 60);
  CHECK(rep.false_alarms == std::vector<Index>{100, 900});
  CHECK(*rep.delays[0] == 19);

  std::vector<Event> reversed(ev.rbegin(), ev.rend());
  const DetectionReport again = detection_report(reversed, changes, 60);
  CHECK(again.false_alarms == rep.false_alarms);
  CHECK(again.delays == rep.delays);

  const DetectionReport missed = detection_report({}, changes, 60);
  CHECK(missed.misses == 1);
}

TEST_CASE("subspace_error_series") {
  const GroundTruth g = make_ground_truth(30, 20, CoefficientSpec{2, 4.0}, 0, 0, 0.0, 3);
  auto exact = std::make_shared<const BasisMatrix>(g.subspaces[0]);
  auto zero = std::make_shared<const BasisMatrix>(BasisMatrix::zero(30));
  std::vector<std::shared_ptr<const BasisMatrix>> hist(20, exact);
  for (int i = 0; i < 5; ++i) hist[static_cast<std::size_t>(i)] = zero;
  const std::vector<Event> ev{{6, EventKind::kSubspaceUpdated, 0, 1, 0.0}};
  const ErrorSeries s = subspace_error_series(hist, g, ev, &g.clean);
  REQUIRE(s.records.size() == 20);
  CHECK(s.records[0].sin_theta == 1.0);
  CHECK(s.records[5].sin_theta < 1e-14);
  CHECK(s.records[5].event == "update");
  CHECK(s.records[5].k == 1);
  CHECK(s.records[10].rel_col_err == 0.0);
  CHECK(per_update_errors(s).size() == 1);
}

TEST_CASE("error series CSV header") {
  ErrorSeries s = series_from({0.5, 0.25});
  const auto path = std::filesystem::temp_directory_path() / "norst_series_test.csv";
  write_error_series_csv(path, s);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,sin_theta,rel_col_err,j,k,event");
  std::filesystem::remove(path);
}
