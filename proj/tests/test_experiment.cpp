#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "norst/experiment.hpp"
#include "norst/io.hpp"

using namespace norst;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.name = "tiny";
  c.generation.n = 60;
  c.generation.d = 300;
  c.generation.r = 3;
  c.generation.f = 4.0;
  c.generation.rho = 0.9;
  c.algorithm.alpha = 10;
  c.algorithm.K = 20;
  c.report.thresholds = {1e-10};
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("norst_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config text round trip") {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    const std::string text = to_text(c);
    CHECK(to_text(parse_config(text)) == text);
  }
}

TEST_CASE("config parsing errors") {
  CHECK_THROWS_AS(parse_config("[generation]\nbogus = 1\n"), ParseError);
  try {
    parse_config("[generation]\nn = 10\nrho = abc\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_config("[nowhere]\n"), ParseError);
  const ExperimentConfig c = parse_config("# comment\n[generation]\nn = 77\n\n[algorithm]\nvariant = sliding:5\n");
  CHECK(c.generation.n == 77);
  CHECK(c.algorithm.variant.beta == 5);
}

TEST_CASE("validation lists every bad field") {
  ExperimentConfig c = tiny();
  CHECK(c.problems().empty());
  c.generation.rho = 1.5;
  c.generation.r = 0;
  c.algorithm.omega_mode = OmegaMode::kFixed;
  try {
    c.validate();
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    std::string all;
    for (const auto& f : e.fields()) all += f + "\n";
    CHECK(all.find("generation.rho") != std::string::npos);
    CHECK(all.find("generation.r") != std::string::npos);
    CHECK(all.find("algorithm.omega_evals") != std::string::npos);
  }
  CHECK_THROWS_AS(preset("nope"), ConfigInvalid);
}

TEST_CASE("preset parameters") {
  const ExperimentConfig a = preset("fixed-bern-0.9");
  CHECK(a.generation.n == 1000);
  CHECK(a.generation.d == 4000);
  CHECK(a.generation.r == 30);
  CHECK(a.generation.f == 100.0);
  CHECK(a.generation.rho == 0.9);
  const TrackerParams p = a.tracker_params();
  CHECK(p.alpha == 60);
  CHECK(p.K == 33);
  CHECK(p.omega_evals == doctest::Approx(8e-4 * CoefficientSpec{30, 100.0}.lambda_min()));

  ExperimentConfig dflt = a;
  dflt.algorithm.K = 0;
  dflt.algorithm.alpha = 0;
  CHECK(dflt.tracker_params().K == 33);  // ceil(ln 1e14)
  CHECK(dflt.tracker_params().alpha == 60);

  const ExperimentConfig mo = preset("moving-object-0.8");
  CHECK(mo.generation.support == SupportKind::kMovingObject);
  CHECK(mo.generation.s == 200);
  CHECK(mo.generation.b0 == 0.05);

  const ExperimentConfig pw = preset("pw-const-noisy");
  CHECK(pw.generation.d == 10000);
  CHECK(pw.generation.changes == 6);
  CHECK(pw.generation.gamma == 100.0);
  CHECK(pw.tracker_params().alpha == 100);

  const ExperimentConfig rmc = preset("rmc");
  CHECK(rmc.algorithm.robust);
  CHECK(rmc.algorithm.robust_params.t_train == 400);
  CHECK(rmc.algorithm.robust_params.effective_xi() == doctest::Approx(10.0 / 15.0));
  CHECK(rmc.algorithm.robust_params.effective_omega() == 5.0);
  CHECK(rmc.generation.outlier_s == 50);
  for (const auto& name : preset_names()) CHECK(preset(name).problems().empty());
}

TEST_CASE("run_once reaches the threshold on a tiny problem") {
  const RunResult r = run_once(tiny(), 3);
  CHECK(r.report.rel_frobenius <= 1e-8);
  REQUIRE(r.report.samples.count(1e-10) == 1);
  CHECK(r.report.samples.at(1e-10).has_value());
}

TEST_CASE("experiments replay bit-exactly from the seed") {
  ExperimentConfig c = tiny();
  c.report.repeats = 2;
  const fs::path da = scratch("replay_a");
  const fs::path db = scratch("replay_b");
  c.report.out_dir = da;
  run_experiment(c);
  c.report.out_dir = db;
  run_experiment(c);
  for (const char* f : {"tiny_seed1_series.csv", "tiny_seed2_series.csv"}) {
    const std::string a = slurp(da / f);
    CHECK(!a.empty());
    CHECK(a == slurp(db / f));
  }
  CHECK(fs::exists(db / "summary.json"));
}

TEST_CASE("complete_file formats agree") {
  const ExperimentConfig c = tiny();
  const GeneratedData data = generate(c.generation, 5);
  const fs::path dir = scratch("complete");
  io::write_stream_nan_csv(dir / "y.csv", data.stream);
  io::write_stream_pair(dir / "values.csv", dir / "missing.txt", data.stream);
  io::write_matrix_csv(dir / "truth.csv", data.truth.clean);

  CompleteFileInput a;
  a.nan_csv = dir / "y.csv";
  a.truth = dir / "truth.csv";
  CompleteFileInput b;
  b.values = dir / "values.csv";
  b.mask = dir / "missing.txt";
  const CompleteFileReport ra = complete_file(a, c, false);
  const CompleteFileReport rb = complete_file(b, c, false);
  const Matrix direct = complete_matrix(data.stream, c.tracker_params());
  CHECK(ra.completed == direct);
  CHECK(rb.completed == direct);
  REQUIRE(ra.rel_frobenius.has_value());
  CHECK(*ra.rel_frobenius <= 1e-8);
  CHECK(!rb.rel_frobenius.has_value());

  SUBCASE("fully observed input comes back unchanged") {
    ObservationStream full = data.stream;
    full.y = data.truth.clean;
    for (auto& m : full.missing) m = IndexSet{};
    CHECK(complete_stream(full, c, false).completed == full.y);
  }
  SUBCASE("missing budget") {
    ObservationStream heavy = data.stream;
    std::vector<Index> rows(58);
    for (Index i = 0; i < 58; ++i) rows[static_cast<std::size_t>(i)] = i;
    heavy.missing[7] = IndexSet(rows, 60);
    for (Index i : heavy.missing[7]) heavy.y(i, 7) = 0.0;
    CHECK_THROWS_AS(complete_stream(heavy, c, false), BudgetExceeded);
    const CompleteFileReport rep = complete_stream(heavy, c, true);
    CHECK(!rep.warnings.empty());
  }
  SUBCASE("malformed csv reports its line") {
    std::ofstream(dir / "bad.csv") << "1,2,3\n4,x,6\n";
    CompleteFileInput bad;
    bad.nan_csv = dir / "bad.csv";
    try {
      complete_file(bad, c, false);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("bench rows") {
  ExperimentConfig c = tiny();
  const auto rows = bench({c}, 1, {VariantParams::basic(), VariantParams::sliding(5)});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].variant == "basic");
  CHECK(rows[1].median_error <= 1e-6);
  CHECK(format_bench_table(rows).find("sliding") != std::string::npos);
}
