#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "norst/metrics.hpp"
#include "norst/robust.hpp"

namespace norst {

enum class SupportKind { kBernoulli, kMovingObject };

struct GenerationConfig {
  Index n = 1000;
  Index d = 4000;
  Index r = 30;
  double f = 100.0;
  Index changes = 0;  ///< J
  Index period = 0;   ///< frames between changes; 0 spreads them evenly
  double gamma = 0.0;
  bool alternating = false;  ///< time-varying coefficient covariance
  SupportKind support = SupportKind::kBernoulli;
  double rho = 0.9;
  Index s = 200;
  double b0 = 0.05;
  double noise_ratio = 0.0;  ///< noise std as a multiple of sqrt(lambda_min)
  bool outliers = false;
  Index outlier_s = 50;
  double outlier_b0 = 0.05;
  double x_min = 10.0;
  double x_max = 25.0;
  bool random_sign = false;
  CollisionPolicy collision = CollisionPolicy::kMask;
  std::uint64_t seed = 1;
};

enum class OmegaMode {
  kKnown,      ///< omega_fraction * lambda_min of the generating model
  kEstimated,  ///< re-estimated from the data after every update cycle
  kFixed,      ///< omega_evals taken literally
};

struct AlgorithmConfig {
  VariantParams variant;
  Index r = 0;       ///< 0: generation.r
  int K = 0;         ///< 0: ceil(ln(1 / epsilon))
  double epsilon = 1e-14;
  Index alpha = 0;   ///< 0: 2 r
  OmegaMode omega_mode = OmegaMode::kKnown;
  double omega_fraction = 8e-4;
  double omega_evals = 0.0;
  FillSettings fill;
  bool smoothing = true;
  bool project_smoothed = false;  ///< project smoothed columns onto their interval basis
  bool robust = false;
  RobustParams robust_params;
  double miss_budget = 0.0;  ///< largest per-column missing fraction; 0: 1 - 2r/n
};

struct ReportConfig {
  std::filesystem::path out_dir = "out";
  std::vector<double> thresholds{1e-13};
  int repeats = 1;
  bool write_series = true;
  bool write_completed = false;
};

struct ExperimentConfig {
  std::string name = "custom";
  GenerationConfig generation;
  AlgorithmConfig algorithm;
  ReportConfig report;

  /// Field-level problems as "section.key: message"; empty when valid.
  std::vector<std::string> problems() const;
  /// Throws ConfigInvalid listing every problem.
  void validate() const;

  Index rank() const { return algorithm.r > 0 ? algorithm.r : generation.r; }
  /// Tracker parameters with every default resolved.
  TrackerParams tracker_params() const;
};

/// Flat INI text: [generation], [algorithm] and [report] sections of
/// key = value lines, '#' comments. Unknown keys and bad values throw ParseError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Inverse of parse_config; every field is written.
std::string to_text(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws ConfigInvalid for unknown names.
ExperimentConfig preset(std::string_view name);

struct GeneratedData {
  GroundTruth truth;
  ObservationStream stream;
};

GeneratedData generate(const GenerationConfig& gen, std::uint64_t seed);

struct RunResult {
  std::uint64_t seed = 0;
  RunReport report;
  ErrorSeries series;
  Matrix completed;  ///< smoothed output, or online fills when smoothing is off
  Index cs_failures = 0;
};

/// One seed: generate, track, optionally smooth, measure.
RunResult run_once(const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentSummary {
  std::vector<RunResult> runs;
  double median_rel_frobenius = 0.0;
  std::map<double, std::optional<double>> median_samples;  ///< nullopt when any run never reached it
  double median_ms_per_frame = 0.0;
};

/// Runs report.repeats seeds (seed, seed + 1, ...) and writes per-seed series
/// CSVs plus summary.json under report.out_dir.
ExperimentSummary run_experiment(const ExperimentConfig& config);

/// Warning raised when a column misses more entries than the budget allows.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompleteFileInput {
  std::optional<std::filesystem::path> nan_csv;  ///< format (a)
  std::optional<std::filesystem::path> values;   ///< format (b) values
  std::optional<std::filesystem::path> mask;     ///< format (b) missing-index lists
  std::optional<std::filesystem::path> truth;    ///< optional n x d reference
};

struct CompleteFileReport {
  Matrix completed;
  double max_miss_frac_col = 0.0;
  std::optional<double> rel_frobenius;
  std::vector<std::string> warnings;
};

/// Completes a matrix file with the tracker configured by `config.algorithm`
/// (r taken from config.rank()). Throws BudgetExceeded unless `override_budget`.
CompleteFileReport complete_file(const CompleteFileInput& input, const ExperimentConfig& config,
                                 bool override_budget);
/// Same, for an in-memory stream.
CompleteFileReport complete_stream(const ObservationStream& stream, const ExperimentConfig& config,
                                   bool override_budget, const Matrix* truth = nullptr);

struct BenchRow {
  std::string config;
  std::string variant;
  double median_error = 0.0;  ///< median over repeats of the final sin_theta
  std::map<double, std::optional<double>> samples;
  double ms_per_frame = 0.0;
};

/// One row per (config, variant). Each config runs with its own variant when
/// `variants` is empty.
std::vector<BenchRow> bench(const std::vector<ExperimentConfig>& configs, int repeats,
                            const std::vector<VariantParams>& variants = {});

std::string format_bench_table(const std::vector<BenchRow>& rows);

}  // namespace norst
