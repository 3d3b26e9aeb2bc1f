#include "norst/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "norst/io.hpp"

namespace norst {

namespace {

// ------------------------------------------------------------ config text

bool parse_bool(std::string_view v, long line) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("expected a boolean, got '" + std::string(v) + "'", line);
}

std::uint64_t parse_u64(std::string_view v, long line) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ParseError("expected an unsigned integer, got '" + std::string(v) + "'", line);
  }
  return out;
}

int parse_int(std::string_view v, long line) { return static_cast<int>(io::parse_index(v, line)); }

std::string bool_text(bool b) { return b ? "true" : "false"; }

const char* support_text(SupportKind k) { return k == SupportKind::kBernoulli ? "bernoulli" : "moving-object"; }

SupportKind parse_support(std::string_view v, long line) {
  if (v == "bernoulli") return SupportKind::kBernoulli;
  if (v == "moving-object") return SupportKind::kMovingObject;
  throw ParseError("support must be bernoulli or moving-object", line);
}

const char* collision_text(CollisionPolicy c) { return c == CollisionPolicy::kMask ? "mask" : "shift"; }

CollisionPolicy parse_collision(std::string_view v, long line) {
  if (v == "mask") return CollisionPolicy::kMask;
  if (v == "shift") return CollisionPolicy::kShift;
  throw ParseError("collision must be mask or shift", line);
}

const char* omega_text(OmegaMode m) {
  switch (m) {
    case OmegaMode::kKnown: return "known";
    case OmegaMode::kEstimated: return "estimated";
    case OmegaMode::kFixed: return "fixed";
  }
  return "known";
}

OmegaMode parse_omega(std::string_view v, long line) {
  if (v == "known") return OmegaMode::kKnown;
  if (v == "estimated") return OmegaMode::kEstimated;
  if (v == "fixed") return OmegaMode::kFixed;
  throw ParseError("omega_mode must be known, estimated or fixed", line);
}

std::vector<double> parse_list(std::string_view v, long line) {
  std::vector<double> out;
  for (auto part : io::split(v, ',')) {
    part = io::trim(part);
    if (!part.empty()) out.push_back(io::parse_double(part, line));
  }
  return out;
}

std::string list_text(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += io::format_double(xs[i]);
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, std::string_view, long)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define NORST_NUM(sec, name, expr, parse)                                                                      \
  Field {                                                                                                      \
    sec, name, [](ExperimentConfig& c, std::string_view v, long l) { c.expr = parse(v, l); },                  \
        [](const ExperimentConfig& c) { return io::format_double(static_cast<double>(c.expr)); }               \
  }
#define NORST_INT(sec, name, expr)                                                                                 \
  Field {                                                                                                          \
    sec, name, [](ExperimentConfig& c, std::string_view v, long l) { c.expr = io::parse_index(v, l); },            \
        [](const ExperimentConfig& c) { return std::to_string(c.expr); }                                           \
  }
#define NORST_BOOL(sec, name, expr)                                                                                \
  Field {                                                                                                          \
    sec, name, [](ExperimentConfig& c, std::string_view v, long l) { c.expr = parse_bool(v, l); },                 \
        [](const ExperimentConfig& c) { return bool_text(c.expr); }                                                \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      NORST_INT("generation", "n", generation.n),
      NORST_INT("generation", "d", generation.d),
      NORST_INT("generation", "r", generation.r),
      NORST_NUM("generation", "f", generation.f, io::parse_double),
      NORST_INT("generation", "changes", generation.changes),
      NORST_INT("generation", "period", generation.period),
      NORST_NUM("generation", "gamma", generation.gamma, io::parse_double),
      NORST_BOOL("generation", "alternating", generation.alternating),
      Field{"generation", "support",
            [](ExperimentConfig& c, std::string_view v, long l) { c.generation.support = parse_support(v, l); },
            [](const ExperimentConfig& c) { return std::string(support_text(c.generation.support)); }},
      NORST_NUM("generation", "rho", generation.rho, io::parse_double),
      NORST_INT("generation", "s", generation.s),
      NORST_NUM("generation", "b0", generation.b0, io::parse_double),
      NORST_NUM("generation", "noise_ratio", generation.noise_ratio, io::parse_double),
      NORST_BOOL("generation", "outliers", generation.outliers),
      NORST_INT("generation", "outlier_s", generation.outlier_s),
      NORST_NUM("generation", "outlier_b0", generation.outlier_b0, io::parse_double),
      NORST_NUM("generation", "x_min", generation.x_min, io::parse_double),
      NORST_NUM("generation", "x_max", generation.x_max, io::parse_double),
      NORST_BOOL("generation", "random_sign", generation.random_sign),
      Field{"generation", "collision",
            [](ExperimentConfig& c, std::string_view v, long l) { c.generation.collision = parse_collision(v, l); },
            [](const ExperimentConfig& c) { return std::string(collision_text(c.generation.collision)); }},
      Field{"generation", "seed",
            [](ExperimentConfig& c, std::string_view v, long l) { c.generation.seed = parse_u64(v, l); },
            [](const ExperimentConfig& c) { return std::to_string(c.generation.seed); }},

      Field{"algorithm", "variant",
            [](ExperimentConfig& c, std::string_view v, long l) {
              try {
                c.algorithm.variant = VariantParams::parse(v);
              } catch (const std::exception& e) {
                throw ParseError(e.what(), l);
              }
            },
            [](const ExperimentConfig& c) { return c.algorithm.variant.name(); }},
      NORST_INT("algorithm", "r", algorithm.r),
      NORST_INT("algorithm", "K", algorithm.K),
      NORST_NUM("algorithm", "epsilon", algorithm.epsilon, io::parse_double),
      NORST_INT("algorithm", "alpha", algorithm.alpha),
      Field{"algorithm", "omega_mode",
            [](ExperimentConfig& c, std::string_view v, long l) { c.algorithm.omega_mode = parse_omega(v, l); },
            [](const ExperimentConfig& c) { return std::string(omega_text(c.algorithm.omega_mode)); }},
      NORST_NUM("algorithm", "omega_fraction", algorithm.omega_fraction, io::parse_double),
      NORST_NUM("algorithm", "omega_evals", algorithm.omega_evals, io::parse_double),
      NORST_NUM("algorithm", "cgls_tol", algorithm.fill.cgls_tol, io::parse_double),
      NORST_NUM("algorithm", "cgls_max_iter", algorithm.fill.cgls_max_iter, parse_int),
      NORST_NUM("algorithm", "max_condition", algorithm.fill.max_condition, io::parse_double),
      NORST_BOOL("algorithm", "smoothing", algorithm.smoothing),
      NORST_BOOL("algorithm", "project_smoothed", algorithm.project_smoothed),
      NORST_NUM("algorithm", "miss_budget", algorithm.miss_budget, io::parse_double),
      NORST_BOOL("algorithm", "robust", algorithm.robust),
      NORST_NUM("algorithm", "robust_x_min", algorithm.robust_params.x_min, io::parse_double),
      NORST_NUM("algorithm", "xi", algorithm.robust_params.xi, io::parse_double),
      NORST_NUM("algorithm", "omega_supp", algorithm.robust_params.omega_supp, io::parse_double),
      NORST_BOOL("algorithm", "auto_omega_supp", algorithm.robust_params.auto_omega),
      NORST_INT("algorithm", "t_train", algorithm.robust_params.t_train),
      NORST_NUM("algorithm", "altproj_iters", algorithm.robust_params.altproj_iters, parse_int),
      NORST_NUM("algorithm", "altproj_tol", algorithm.robust_params.altproj_tol, io::parse_double),
      NORST_NUM("algorithm", "train_fill", algorithm.robust_params.train_fill, io::parse_double),

      Field{"report", "out",
            [](ExperimentConfig& c, std::string_view v, long) { c.report.out_dir = std::string(v); },
            [](const ExperimentConfig& c) { return c.report.out_dir.string(); }},
      Field{"report", "thresholds",
            [](ExperimentConfig& c, std::string_view v, long l) { c.report.thresholds = parse_list(v, l); },
            [](const ExperimentConfig& c) { return list_text(c.report.thresholds); }},
      NORST_NUM("report", "repeats", report.repeats, parse_int),
      NORST_BOOL("report", "write_series", report.write_series),
      NORST_BOOL("report", "write_completed", report.write_completed),
  };
  return table;
}

#undef NORST_NUM
#undef NORST_INT
#undef NORST_BOOL

template <class T>
T median(std::vector<T> v) {
  if (v.empty()) return T{};
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ------------------------------------------------------------- validation

std::vector<std::string> ExperimentConfig::problems() const {
  std::vector<std::string> out;
  auto need = [&out](bool ok, const char* field, const char* msg) {
    if (!ok) out.push_back(std::string(field) + ": " + msg);
  };
  const auto& g = generation;
  need(g.n >= 1, "generation.n", "must be >= 1");
  need(g.d >= 1, "generation.d", "must be >= 1");
  need(g.r >= 1 && g.r <= g.n, "generation.r", "must be in [1, n]");
  need(g.f >= 1.0, "generation.f", "must be >= 1");
  need(g.changes >= 0, "generation.changes", "must be >= 0");
  need(g.period >= 0, "generation.period", "must be >= 0");
  need(g.gamma >= 0.0, "generation.gamma", "must be >= 0");
  if (g.changes > 0) {
    const Index period = g.period > 0 ? g.period : g.d / (g.changes + 1);
    need(g.changes * period + 1 <= g.d, "generation.period", "last change falls after d");
    need(period >= g.r, "generation.period", "changes must be at least r frames apart");
  }
  need(g.rho > 0.0 && g.rho <= 1.0, "generation.rho", "must be in (0, 1]");
  if (g.support == SupportKind::kMovingObject) {
    need(g.s >= 1 && g.s < g.n, "generation.s", "must be in [1, n)");
    need(g.b0 > 0.0 && g.b0 <= 1.0, "generation.b0", "must be in (0, 1]");
  }
  need(g.noise_ratio >= 0.0, "generation.noise_ratio", "must be >= 0");
  if (g.outliers) {
    need(g.outlier_s >= 1 && g.outlier_s < g.n, "generation.outlier_s", "must be in [1, n)");
    need(g.outlier_b0 > 0.0 && g.outlier_b0 <= 1.0, "generation.outlier_b0", "must be in (0, 1]");
    need(g.x_min > 0.0 && g.x_min <= g.x_max, "generation.x_min", "need 0 < x_min <= x_max");
  }

  const auto& a = algorithm;
  const Index r = rank();
  const Index alpha = a.alpha > 0 ? a.alpha : 2 * r;
  need(a.r >= 0 && r <= g.n, "algorithm.r", "must be in [0, n]");
  need(a.K >= 0, "algorithm.K", "must be >= 0");
  need(a.K > 0 || (a.epsilon > 0.0 && a.epsilon < 1.0), "algorithm.epsilon", "must be in (0, 1) when K = 0");
  need(a.alpha >= 0 && alpha >= r, "algorithm.alpha", "must be >= r");
  need(a.omega_fraction > 0.0, "algorithm.omega_fraction", "must be > 0");
  need(a.omega_mode != OmegaMode::kFixed || a.omega_evals > 0.0, "algorithm.omega_evals",
       "must be > 0 with omega_mode = fixed");
  need(a.fill.cgls_tol >= 0.0, "algorithm.cgls_tol", "must be >= 0");
  need(a.fill.cgls_max_iter >= 1, "algorithm.cgls_max_iter", "must be >= 1");
  need(a.fill.max_condition > 1.0, "algorithm.max_condition", "must be > 1");
  need(a.variant.beta >= 0 && a.variant.beta <= alpha, "algorithm.variant", "sliding hop must be in [1, alpha]");
  need(a.variant.reuse >= 0, "algorithm.variant", "reuse count must be >= 0");
  need(a.miss_budget >= 0.0 && a.miss_budget < 1.0, "algorithm.miss_budget", "must be in [0, 1)");
  if (a.robust) {
    const auto& rp = a.robust_params;
    need(rp.x_min > 0.0, "algorithm.robust_x_min", "must be > 0");
    need(rp.t_train >= r && rp.t_train < g.d, "algorithm.t_train", "must be in [r, d)");
    need(rp.altproj_iters >= 1, "algorithm.altproj_iters", "must be >= 1");
    need(rp.altproj_tol > 0.0, "algorithm.altproj_tol", "must be > 0");
  }

  need(report.repeats >= 1, "report.repeats", "must be >= 1");
  need(std::all_of(report.thresholds.begin(), report.thresholds.end(), [](double x) { return x > 0.0; }),
       "report.thresholds", "must all be > 0");
  return out;
}

void ExperimentConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ConfigInvalid(std::move(p));
}

TrackerParams ExperimentConfig::tracker_params() const {
  const auto& a = algorithm;
  TrackerParams p;
  p.r = rank();
  p.alpha = a.alpha > 0 ? a.alpha : 2 * p.r;
  p.K = a.K > 0 ? a.K : static_cast<int>(std::ceil(std::log(1.0 / a.epsilon)));
  p.omega_fraction = a.omega_fraction;
  switch (a.omega_mode) {
    case OmegaMode::kKnown:
      p.omega_evals = a.omega_fraction * CoefficientSpec{generation.r, generation.f, false}.lambda_min();
      break;
    case OmegaMode::kEstimated:
      p.omega_evals = 0.0;
      break;
    case OmegaMode::kFixed:
      p.omega_evals = a.omega_evals;
      break;
  }
  p.fill = a.fill;
  p.variant = a.variant;
  p.project_smoothed = a.project_smoothed;
  return p;
}

// ------------------------------------------------------------- config text

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = std::string(io::trim(line.substr(1, line.size() - 2)));
      if (section != "generation" && section != "algorithm" && section != "report" && section != "experiment") {
        throw ParseError("unknown section [" + section + "]", line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const std::string key(io::trim(line.substr(0, eq)));
    const std::string_view value = io::trim(line.substr(eq + 1));
    if (section == "experiment" && key == "name") {
      c.name = std::string(value);
      continue;
    }
    if (section.empty()) throw ParseError("key '" + key + "' outside a section", line_no);
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return section == f.section && key == f.key; });
    if (it == table.end()) throw ParseError("unknown key " + section + "." + key, line_no);
    it->set(c, value, line_no);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& config) {
  std::string out = "[experiment]\nname = " + config.name + "\n";
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      section = f.section;
      out += "\n[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- presets

std::vector<std::string> preset_names() {
  return {"fixed-bern-0.7", "fixed-bern-0.9", "moving-object-0.8", "pw-const-noisy", "rmc"};
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  c.report.out_dir = std::filesystem::path("out") / c.name;
  auto& g = c.generation;
  auto& a = c.algorithm;
  g.n = 1000;
  g.d = 4000;
  g.r = 30;
  g.f = 100.0;
  a.alpha = 60;
  a.K = 33;
  a.omega_mode = OmegaMode::kKnown;
  a.omega_fraction = 8e-4;
  if (name == "fixed-bern-0.7") {
    g.rho = 0.7;
    a.smoothing = false;
    c.report.thresholds = {1e-13, 1e-14};
    c.report.repeats = 10;
  } else if (name == "fixed-bern-0.9") {
    g.rho = 0.9;
    c.report.thresholds = {1e-13};
    c.report.repeats = 5;
  } else if (name == "moving-object-0.8") {
    g.support = SupportKind::kMovingObject;
    g.s = 200;
    g.b0 = 0.05;
    a.smoothing = false;
    c.report.thresholds = {1e-10};
  } else if (name == "pw-const-noisy") {
    g.d = 10000;
    g.changes = 6;
    g.period = 800;
    g.gamma = 100.0;
    g.rho = 0.9;
    g.noise_ratio = 3e-3;
    a.alpha = 100;
    a.K = 7;
    c.report.thresholds = {1e-2, 2e-3};
    c.report.repeats = 5;
  } else if (name == "rmc") {
    g.rho = 0.9;
    g.outliers = true;
    g.outlier_s = 50;
    g.outlier_b0 = 0.05;
    g.x_min = 10.0;
    g.x_max = 25.0;
    a.robust = true;
    a.omega_mode = OmegaMode::kFixed;
    a.omega_evals = 7.8e-4;
    a.robust_params.x_min = 10.0;
    a.robust_params.xi = 10.0 / 15.0;
    a.robust_params.omega_supp = 5.0;
    a.robust_params.t_train = 400;
    a.robust_params.altproj_iters = 500;
    a.robust_params.altproj_tol = 1e-3;
    a.robust_params.train_fill = 10.0;
    c.report.thresholds = {1e-10};
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigInvalid({"preset: unknown name '" + std::string(name) + "' (known: " + known + ")"});
  }
  return c;
}

// ------------------------------------------------------------------- runs

GeneratedData generate(const GenerationConfig& g, std::uint64_t seed) {
  GeneratedData out;
  const CoefficientSpec coeffs{g.r, g.f, g.alternating};
  out.truth = make_ground_truth(g.n, g.d, coeffs, g.changes, g.period, g.gamma, seed);
  SupportModel model = BernoulliSupport{g.rho};
  if (g.support == SupportKind::kMovingObject) model = MovingObjectSupport{g.s, g.b0, std::nullopt};
  const auto missing = gen_supports(model, g.n, g.d, seed);
  std::optional<std::vector<SparseFrame>> outliers;
  if (g.outliers) {
    OutlierSpec os;
    os.support = MovingObjectSupport{g.outlier_s, g.outlier_b0, std::nullopt};
    os.x_min = g.x_min;
    os.x_max = g.x_max;
    os.random_sign = g.random_sign;
    os.collision = g.collision;
    outliers = gen_outliers(g.n, g.d, os, missing, seed);
  }
  const double noise_std = g.noise_ratio * std::sqrt(coeffs.lambda_min());
  out.truth.noise_std = noise_std;
  out.stream = assemble_stream(out.truth, missing, outliers, noise_std, seed);
  return out;
}

RunResult run_once(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const GeneratedData data = generate(config.generation, seed);
  const TrackerParams params = config.tracker_params();
  const Index n = data.stream.n;
  const Index d = data.stream.d;

  RunResult res;
  res.seed = seed;
  Matrix online(n, d);
  std::vector<std::shared_ptr<const BasisMatrix>> bases;
  TrackerState state;
  std::vector<double> frame_ms;
  Index first_t = 1;

  if (config.algorithm.robust) {
    const auto t0 = std::chrono::steady_clock::now();
    RobustRun run = run_robust(data.stream, params, config.algorithm.robust_params);
    const Index tracked = std::max<Index>(1, d - config.algorithm.robust_params.t_train);
    frame_ms.push_back(ms_since(t0) / static_cast<double>(tracked));
    res.cs_failures = run.cs_failures;
    online = std::move(run.online);
    bases = std::move(run.bases);
    state = std::move(run.state);
    res.completed = config.algorithm.smoothing ? std::move(run.completed) : online;
  } else {
    Tracker tracker(n, params);
    bases.reserve(static_cast<std::size_t>(d));
    frame_ms.reserve(static_cast<std::size_t>(d));
    for (Index t = 0; t < d; ++t) {
      const auto t0 = std::chrono::steady_clock::now();
      FrameOutput fo = tracker.step(data.stream.y.col(t), data.stream.missing[static_cast<std::size_t>(t)]);
      const double ms = ms_since(t0);
      // Steady state only: the first alpha frames fill the buffer.
      if (t >= params.alpha) frame_ms.push_back(ms);
      online.col(t) = fo.ell_hat;
      bases.push_back(std::move(fo.basis));
    }
    tracker.finish();
    state = tracker.state();
    res.completed = config.algorithm.smoothing
                        ? smooth(data.stream.y, data.stream.missing, state, params.fill, params.project_smoothed)
                        : online;
  }

  res.series = subspace_error_series(bases, data.truth, state.log, &online, first_t);
  res.report.rel_frobenius = rel_frobenius(res.completed, data.truth.clean);
  for (double th : config.report.thresholds) {
    res.report.samples[th] = samples_to_threshold(res.series, th, params.alpha);
  }
  res.report.detection = detection_report(state.log, data.truth.change_times, params.alpha);
  res.report.ms_per_frame = median(frame_ms);
  return res;
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentSummary sum;
  const auto& out_dir = config.report.out_dir;
  std::filesystem::create_directories(out_dir);

  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> errs;
  std::vector<double> ms;
  for (int i = 0; i < config.report.repeats; ++i) {
    const std::uint64_t seed = config.generation.seed + static_cast<std::uint64_t>(i);
    RunResult res = run_once(config, seed);
    const std::string stem = config.name + "_seed" + std::to_string(seed);
    if (config.report.write_series) write_error_series_csv(out_dir / (stem + "_series.csv"), res.series);
    if (config.report.write_completed) io::write_matrix_csv(out_dir / (stem + "_completed.csv"), res.completed);

    nlohmann::json j;
    j["seed"] = seed;
    j["rel_frobenius"] = res.report.rel_frobenius;
    j["ms_per_frame"] = res.report.ms_per_frame;
    j["final_sin_theta"] = res.series.records.empty() ? 1.0 : res.series.records.back().sin_theta;
    nlohmann::json samples = nlohmann::json::object();
    for (const auto& [th, s] : res.report.samples) {
      samples[io::format_double(th)] = s ? nlohmann::json(*s) : nlohmann::json(nullptr);
    }
    j["samples_to_threshold"] = samples;
    const auto& det = res.report.detection;
    j["detections"] = det.detections;
    j["false_alarms"] = det.false_alarms;
    j["misses"] = det.misses;
    nlohmann::json delays = nlohmann::json::array();
    for (const auto& dl : det.delays) delays.push_back(dl ? nlohmann::json(*dl) : nlohmann::json(nullptr));
    j["delays"] = delays;
    if (config.algorithm.robust) j["cs_failures"] = res.cs_failures;
    runs.push_back(std::move(j));

    errs.push_back(res.report.rel_frobenius);
    ms.push_back(res.report.ms_per_frame);
    sum.runs.push_back(std::move(res));
  }

  sum.median_rel_frobenius = median(errs);
  sum.median_ms_per_frame = median(ms);
  for (double th : config.report.thresholds) {
    std::vector<double> vals;
    bool all = true;
    for (const auto& r : sum.runs) {
      const auto& s = r.report.samples.at(th);
      if (s) {
        vals.push_back(static_cast<double>(*s));
      } else {
        all = false;
      }
    }
    sum.median_samples[th] = all ? std::optional<double>(median(vals)) : std::nullopt;
  }

  nlohmann::json summary;
  summary["name"] = config.name;
  summary["config"] = to_text(config);
  summary["runs"] = runs;
  summary["median_rel_frobenius"] = sum.median_rel_frobenius;
  summary["median_ms_per_frame"] = sum.median_ms_per_frame;
  nlohmann::json med = nlohmann::json::object();
  for (const auto& [th, v] : sum.median_samples) med[io::format_double(th)] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  summary["median_samples_to_threshold"] = med;
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
  return sum;
}

// ----------------------------------------------------------- file completion

CompleteFileReport complete_stream(const ObservationStream& stream, const ExperimentConfig& config,
                                   bool override_budget, const Matrix* truth) {
  const TrackerParams params = config.tracker_params();
  params.validate();
  if (params.r > stream.n) throw ConfigInvalid({"algorithm.r: larger than the number of rows"});
  CompleteFileReport rep;
  rep.max_miss_frac_col = miss_frac_stats(stream.missing, stream.n, std::min(params.alpha, stream.d)).col;
  const double budget = config.algorithm.miss_budget > 0.0
                            ? config.algorithm.miss_budget
                            : 1.0 - 2.0 * static_cast<double>(params.r) / static_cast<double>(stream.n);
  if (rep.max_miss_frac_col > budget) {
    std::ostringstream msg;
    msg << "max missing fraction per column " << rep.max_miss_frac_col << " exceeds the budget " << budget;
    if (!override_budget) throw BudgetExceeded(msg.str() + " (use --override-budget to proceed)");
    rep.warnings.push_back(msg.str());
  }
  rep.completed = complete_matrix(stream, params);
  if (truth) rep.rel_frobenius = rel_frobenius(rep.completed, *truth);
  return rep;
}

CompleteFileReport complete_file(const CompleteFileInput& input, const ExperimentConfig& config,
                                 bool override_budget) {
  ObservationStream stream;
  if (input.nan_csv) {
    stream = io::read_stream_nan_csv(*input.nan_csv);
  } else if (input.values && input.mask) {
    stream = io::read_stream_pair(*input.values, *input.mask);
  } else {
    throw ConfigInvalid({"input: need a NaN-missing CSV or a values + mask pair"});
  }
  std::optional<Matrix> truth;
  if (input.truth) truth = io::read_matrix_csv(*input.truth);
  return complete_stream(stream, config, override_budget, truth ? &*truth : nullptr);
}

// ------------------------------------------------------------------ bench

std::vector<BenchRow> bench(const std::vector<ExperimentConfig>& configs, int repeats,
                            const std::vector<VariantParams>& variants) {
  std::vector<BenchRow> rows;
  for (const auto& base : configs) {
    std::vector<VariantParams> list = variants;
    if (list.empty()) list.push_back(base.algorithm.variant);
    for (const auto& v : list) {
      ExperimentConfig c = base;
      c.algorithm.variant = v;
      c.algorithm.smoothing = false;
      BenchRow row;
      row.config = c.name;
      row.variant = v.name();
      std::vector<double> errs;
      std::vector<double> ms;
      std::map<double, std::vector<double>> samples;
      std::map<double, bool> all;
      for (int i = 0; i < repeats; ++i) {
        const RunResult res = run_once(c, c.generation.seed + static_cast<std::uint64_t>(i));
        errs.push_back(res.series.records.empty() ? 1.0 : res.series.records.back().sin_theta);
        ms.push_back(res.report.ms_per_frame);
        for (const auto& [th, s] : res.report.samples) {
          all.try_emplace(th, true);
          if (s) {
            samples[th].push_back(static_cast<double>(*s));
          } else {
            all[th] = false;
          }
        }
      }
      row.median_error = median(errs);
      row.ms_per_frame = median(ms);
      for (const auto& [th, ok] : all) row.samples[th] = ok ? std::optional<double>(median(samples[th])) : std::nullopt;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "config" << std::setw(22) << "variant" << std::setw(14) << "median_err";
  std::vector<double> ths;
  for (const auto& r : rows) {
    for (const auto& [th, s] : r.samples) {
      if (std::find(ths.begin(), ths.end(), th) == ths.end()) ths.push_back(th);
    }
  }
  for (double th : ths) out << std::setw(14) << ("n@" + io::format_double(th));
  out << "ms/frame\n";
  for (const auto& r : rows) {
    out << std::setw(20) << r.config << std::setw(22) << r.variant << std::setw(14) << std::setprecision(3)
        << std::scientific << r.median_error << std::defaultfloat;
    for (double th : ths) {
      const auto it = r.samples.find(th);
      const std::string cell = it != r.samples.end() && it->second ? std::to_string(static_cast<long>(*it->second)) : "-";
      out << std::setw(14) << cell;
    }
    out << std::fixed << std::setprecision(3) << r.ms_per_frame << std::defaultfloat << '\n';
  }
  return out.str();
}

}  // namespace norst
