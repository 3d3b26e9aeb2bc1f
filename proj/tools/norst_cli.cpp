// norst: generate synthetic streams, track, complete matrix files, benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "norst/experiment.hpp"
#include "norst/io.hpp"

namespace fs = std::filesystem;
using namespace norst;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config file");
  cmd->add_option("--preset", c.preset, "named preset (see `norst presets`)");
  cmd->add_option("--seed", c.seed, "seed of the first repeat");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--variant", c.variant, "basic | sample-efficient | sliding:B | reuse:R | sliding-reuse:B:R");
}

ExperimentConfig resolve(const Common& c, const char* fallback_preset) {
  if (!c.config.empty() && !c.preset.empty()) throw ConfigInvalid({"--config and --preset are exclusive"});
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = load_config(c.config);
  } else if (!c.preset.empty()) {
    cfg = preset(c.preset);
  } else if (fallback_preset) {
    cfg = preset(fallback_preset);
  }
  if (c.seed) cfg.generation.seed = *c.seed;
  if (!c.out.empty()) cfg.report.out_dir = c.out;
  if (!c.variant.empty()) {
    try {
      cfg.algorithm.variant = VariantParams::parse(c.variant);
    } catch (const std::exception& e) {
      throw ConfigInvalid({std::string("--variant: ") + e.what()});
    }
  }
  cfg.validate();
  return cfg;
}

void print_summary(const ExperimentConfig& cfg, const ExperimentSummary& s) {
  std::printf("%s: %d run(s), median rel-Frobenius %.3e, median %.3f ms/frame\n", cfg.name.c_str(),
              static_cast<int>(s.runs.size()), s.median_rel_frobenius, s.median_ms_per_frame);
  for (const auto& [th, v] : s.median_samples) {
    if (v) {
      std::printf("  samples to %.0e: %.0f\n", th, *v);
    } else {
      std::printf("  samples to %.0e: not reached\n", th);
    }
  }
  for (const auto& r : s.runs) {
    const auto& det = r.report.detection;
    if (det.delays.empty() && det.detections.empty()) continue;
    std::printf("  seed %llu: %zu detection(s), %zu false alarm(s), %ld miss(es)\n",
                static_cast<unsigned long long>(r.seed), det.detections.size(), det.false_alarms.size(),
                static_cast<long>(det.misses));
  }
  std::printf("  written to %s\n", cfg.report.out_dir.string().c_str());
}

int cmd_generate(const Common& c) {
  const ExperimentConfig cfg = resolve(c, "fixed-bern-0.7");
  const GeneratedData data = generate(cfg.generation, cfg.generation.seed);
  const fs::path out = cfg.report.out_dir;
  fs::create_directories(out);
  io::write_stream_nan_csv(out / "y_nan.csv", data.stream);
  io::write_stream_pair(out / "values.csv", out / "missing.txt", data.stream);
  io::write_matrix_csv(out / "clean.csv", data.truth.clean);
  std::ofstream(out / "config.ini") << to_text(cfg);
  const auto stats = miss_frac_stats(data.stream.missing, data.stream.n, cfg.tracker_params().alpha);
  std::printf("generated %ld x %ld stream into %s (max-miss-frac-col %.3f, row_alpha %.3f)\n",
              static_cast<long>(data.stream.n), static_cast<long>(data.stream.d), out.string().c_str(), stats.col,
              stats.row_alpha);
  return 0;
}

int cmd_track(const Common& c, bool robust) {
  ExperimentConfig cfg = resolve(c, robust ? "rmc" : "fixed-bern-0.7");
  if (robust && !cfg.algorithm.robust) throw ConfigInvalid({"algorithm.robust: must be true for `robust`"});
  const ExperimentSummary s = run_experiment(cfg);
  print_summary(cfg, s);
  return 0;
}

struct CompleteArgs {
  std::string input;
  std::string values;
  std::string mask;
  std::string truth;
  bool override_budget = false;
};

int cmd_complete(const Common& c, const CompleteArgs& a) {
  ExperimentConfig cfg = resolve(c, nullptr);
  CompleteFileInput in;
  if (!a.input.empty()) in.nan_csv = a.input;
  if (!a.values.empty()) in.values = a.values;
  if (!a.mask.empty()) in.mask = a.mask;
  if (!a.truth.empty()) in.truth = a.truth;
  CompleteFileReport rep;
  try {
    rep = complete_file(in, cfg, a.override_budget);
  } catch (const BudgetExceeded& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const fs::path out = cfg.report.out_dir;
  fs::create_directories(out);
  io::write_matrix_csv(out / "completed.csv", rep.completed);
  nlohmann::json j;
  j["rows"] = rep.completed.rows();
  j["cols"] = rep.completed.cols();
  j["max_miss_frac_col"] = rep.max_miss_frac_col;
  j["rel_frobenius"] = rep.rel_frobenius ? nlohmann::json(*rep.rel_frobenius) : nlohmann::json(nullptr);
  j["warnings"] = rep.warnings;
  std::ofstream(out / "report.json") << j.dump(2) << '\n';
  std::printf("completed %ld x %ld into %s", static_cast<long>(rep.completed.rows()),
              static_cast<long>(rep.completed.cols()), (out / "completed.csv").string().c_str());
  if (rep.rel_frobenius) std::printf(" (rel-Frobenius %.3e)", *rep.rel_frobenius);
  std::printf("\n");
  return 0;
}

int cmd_bench(const Common& c, const std::vector<std::string>& presets, const std::vector<std::string>& variants,
              int repeats) {
  std::vector<ExperimentConfig> configs;
  if (!c.config.empty()) configs.push_back(resolve(c, nullptr));
  for (const auto& p : presets) {
    Common cc = c;
    cc.config.clear();
    cc.preset = p;
    configs.push_back(resolve(cc, nullptr));
  }
  if (configs.empty()) configs.push_back(resolve(c, "fixed-bern-0.7"));
  std::vector<VariantParams> vs;
  for (const auto& v : variants) {
    try {
      vs.push_back(VariantParams::parse(v));
    } catch (const std::exception& e) {
      throw ConfigInvalid({std::string("--variant: ") + e.what()});
    }
  }
  const auto rows = bench(configs, repeats, vs);
  const std::string table = format_bench_table(rows);
  std::fputs(table.c_str(), stdout);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream f(fs::path(c.out) / "bench.txt");
    f << table;
  }
  return 0;
}

int cmd_presets(const std::string& name) {
  if (name.empty()) {
    for (const auto& n : preset_names()) std::printf("%s\n", n.c_str());
  } else {
    std::fputs(to_text(preset(name)).c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NORST-miss subspace tracking and matrix completion"};
  app.require_subcommand(1);

  Common common;
  auto* gen = app.add_subcommand("generate", "write a synthetic stream (NaN CSV, values + mask pair, truth)");
  add_common(gen, common);

  auto* track = app.add_subcommand("track", "run an experiment and write error series and a summary");
  add_common(track, common);

  auto* complete = app.add_subcommand("complete", "complete a matrix file");
  add_common(complete, common);
  CompleteArgs ca;
  complete->add_option("--input", ca.input, "CSV with NaN at missing entries");
  complete->add_option("--values", ca.values, "CSV of values (pair format)");
  complete->add_option("--mask", ca.mask, "per-column missing row indices (pair format)");
  complete->add_option("--truth", ca.truth, "reference matrix for rel-Frobenius");
  complete->add_flag("--override-budget", ca.override_budget, "proceed when columns miss too many entries");

  auto* robust = app.add_subcommand("robust", "robust tracking with sparse outliers");
  add_common(robust, common);

  auto* benchc = app.add_subcommand("bench", "compare variants");
  Common bench_common;
  benchc->add_option("--config", bench_common.config, "experiment config file");
  benchc->add_option("--seed", bench_common.seed, "seed of the first repeat");
  benchc->add_option("--out", bench_common.out, "directory for bench.txt");
  std::vector<std::string> bench_presets;
  std::vector<std::string> bench_variants;
  int repeats = 1;
  benchc->add_option("--preset", bench_presets, "preset(s) to run");
  benchc->add_option("--variant", bench_variants, "variant(s) to compare");
  benchc->add_option("--repeats", repeats, "seeds per row")->check(CLI::PositiveNumber);

  auto* presets = app.add_subcommand("presets", "list presets or print one as config text");
  std::string preset_name;
  presets->add_option("name", preset_name, "preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(common);
    if (*track) return cmd_track(common, false);
    if (*complete) return cmd_complete(common, ca);
    if (*robust) return cmd_track(common, true);
    if (*benchc) return cmd_bench(bench_common, bench_presets, bench_variants, repeats);
    if (*presets) return cmd_presets(preset_name);
  } catch (const ConfigInvalid& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
