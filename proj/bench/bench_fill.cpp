// Times fill_batch (OpenMP) against fill_batch_serial on one synthetic batch.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <vector>

#include "CLI11.hpp"
#include "norst/datagen.hpp"
#include "norst/fill.hpp"

using namespace norst;

namespace {

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fill_batch vs fill_batch_serial"};
  Index n = 1000, d = 2000, r = 30;
  double rho = 0.9;
  int repeats = 5;
  std::uint64_t seed = 1;
  app.add_option("-n", n, "Ambient dimension");
  app.add_option("-d", d, "Frames in the batch");
  app.add_option("-r", r, "Subspace rank");
  app.add_option("--rho", rho, "Observed fraction");
  app.add_option("--repeats", repeats, "Timing repeats (best is reported)");
  app.add_option("--seed", seed, "Seed");
  CLI11_PARSE(app, argc, argv);

  const GroundTruth g = make_ground_truth(n, d, CoefficientSpec{r, 100.0}, 0, 0, 0.0, seed);
  const auto miss = gen_bernoulli_supports(n, d, rho, seed);
  const ObservationStream s = assemble_stream(g, miss, std::nullopt, 0.0, seed);
  const BasisMatrix& p = g.subspaces[0];

  BatchFill par, ser;
  const double ms_ser = best_ms(repeats, [&] { ser = fill_batch_serial(s.y, s.missing, p); });
  const double ms_par = best_ms(repeats, [&] { par = fill_batch(s.y, s.missing, p); });
  const bool same = par.ell_hat == ser.ell_hat && par.failed == ser.failed;

  std::printf("n=%ld d=%ld r=%ld rho=%.2f threads=%d\n", static_cast<long>(n), static_cast<long>(d),
              static_cast<long>(r), rho, omp_get_max_threads());
  std::printf("%-18s %12s %12s\n", "kernel", "ms/batch", "us/frame");
  std::printf("%-18s %12.2f %12.2f\n", "fill_batch_serial", ms_ser, 1e3 * ms_ser / static_cast<double>(d));
  std::printf("%-18s %12.2f %12.2f\n", "fill_batch", ms_par, 1e3 * ms_par / static_cast<double>(d));
  std::printf("speedup %.2fx, outputs identical: %s\n", ms_ser / ms_par, same ? "yes" : "no");
  return same ? 0 : 1;
}
