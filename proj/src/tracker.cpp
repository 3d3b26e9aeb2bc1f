#include "norst/tracker.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "norst/io.hpp"

namespace norst {

void TrackerParams::validate() const {
  if (r < 1) throw std::invalid_argument("TrackerParams: r must be >= 1");
  if (K < 1) throw std::invalid_argument("TrackerParams: K must be >= 1");
  if (alpha < r) throw std::invalid_argument("TrackerParams: alpha must be >= r");
  if (!(omega_fraction > 0.0)) throw std::invalid_argument("TrackerParams: omega_fraction must be > 0");
  if (!(fill.cgls_tol > 0.0) || fill.cgls_max_iter < 1) throw std::invalid_argument("TrackerParams: bad CGLS settings");
  if (variant.reuse < 0) throw std::invalid_argument("TrackerParams: reuse count must be >= 0");
  if (variant.beta < 0 || variant.beta > alpha) throw std::invalid_argument("TrackerParams: need 1 <= beta <= alpha");
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kSubspaceUpdated:
      return "update";
    case EventKind::kChangeDetected:
      return "detect";
    case EventKind::kUpdateComplete:
      return "complete";
    case EventKind::kFillFailed:
      return "fill-failed";
  }
  return "update";
}

EventKind parse_event_kind(std::string_view text) {
  if (text == "update") return EventKind::kSubspaceUpdated;
  if (text == "detect") return EventKind::kChangeDetected;
  if (text == "complete") return EventKind::kUpdateComplete;
  if (text == "fill-failed") return EventKind::kFillFailed;
  throw std::invalid_argument("unknown event kind '" + std::string(text) + "'");
}

BasisMatrix subspace_update(const Matrix& buffer, Index r, const SvdOptions& svd) {
  return r_svd(buffer, r, svd).basis;
}

DetectResult detect_change(const Matrix& buffer, const BasisMatrix& p_prev, double omega_evals, Index alpha) {
  if (buffer.rows() != p_prev.ambient_dim()) throw DimensionMismatch("detect_change: buffer and basis dimensions differ");
  const Matrix b = p_prev.project_out(buffer);
  DetectResult res;
  res.statistic = lambda_max_sym(b.transpose() * b);
  res.detected = res.statistic >= static_cast<double>(alpha) * omega_evals;
  return res;
}

BasisMatrix union_basis(const BasisMatrix& a, const BasisMatrix& b, double tol) {
  if (a.ambient_dim() != b.ambient_dim()) throw DimensionMismatch("union_basis: ambient dimensions differ");
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  Matrix resid = a.project_out(b.matrix());
  resid = a.project_out(resid);
  const SmallSvd sv = jacobi_svd(resid);
  Index extra = 0;
  while (extra < sv.s.size() && sv.s(extra) > tol) ++extra;
  Matrix q(a.ambient_dim(), a.rank() + extra);
  q.leftCols(a.rank()) = a.matrix();
  if (extra > 0) {
    Matrix add = sv.u.leftCols(extra);
    add = a.project_out(add);
    q.rightCols(extra) = Eigen::HouseholderQR<Matrix>(add).householderQ() * Matrix::Identity(add.rows(), extra);
  }
  return BasisMatrix::trusted(std::move(q));
}

// ------------------------------------------------------------------ Tracker

Tracker::Tracker(Index n, TrackerParams params)
    : Tracker(n, std::move(params), BasisMatrix::zero(n), 1) {}

Tracker::Tracker(Index n, TrackerParams params, BasisMatrix initial, Index anchor)
    : n_(n), params_(std::move(params)) {
  params_.validate();
  if (initial.ambient_dim() != n) throw DimensionMismatch("Tracker: initial basis has wrong ambient dimension");
  schedule_ = sliding_window_schedule(params_.alpha, params_.variant.beta, params_.K);
  state_.basis = std::make_shared<const BasisMatrix>(std::move(initial));
  state_.anchor = anchor;
  state_.t = anchor - 1;
  state_.omega_evals = params_.omega_evals;
}

FrameOutput Tracker::step(const Vector& y, const IndexSet& missing) {
  if (y.size() != n_) throw DimensionMismatch("Tracker::step: frame has wrong length");
  const BasisMatrix& p = *state_.basis;
  const bool coefficient_fill = params_.variant.mode == VariantMode::kSampleEfficient &&
                                state_.phase == Phase::kDetect && !state_.frozen.empty();
  if (coefficient_fill) {
    try {
      Vector ell = sample_efficient_fill(y, missing.complement(n_), p, params_.fill.max_condition);
      // Detection sees a fill that keeps the observed entries.
      Vector keep = y;
      for (Index i : missing) keep(i) = ell(i);
      return advance(y, missing, std::move(ell), false, &keep);
    } catch (const IllConditioned&) {
    }
  }
  try {
    FillResult fr = project_ls_fill(y, missing, p, params_.fill);
    return advance(y, missing, std::move(fr.ell_hat));
  } catch (const IllConditioned&) {
    return advance(y, missing, y, true);
  }
}

FrameOutput Tracker::advance(const Vector& y, const IndexSet& missing, Vector ell_hat, bool failed,
                             const Vector* buffer_fill) {
  FrameOutput out;
  out.t = ++state_.t;
  out.failed = failed;
  if (failed) out.events.push_back({out.t, EventKind::kFillFailed, state_.j, 0, 0.0});

  state_.buffer.push_back({out.t, y, missing, buffer_fill ? *buffer_fill : ell_hat});
  while (static_cast<Index>(state_.buffer.size()) > params_.alpha) state_.buffer.pop_front();
  ++state_.frames_since_update;

  if (state_.phase == Phase::kUpdate) {
    const int u = schedule_.update_at(out.t, state_.anchor);
    if (u > 0 && static_cast<Index>(state_.buffer.size()) == params_.alpha) run_update(u, out.events);
  } else {
    const Index since = out.t - state_.completions.back();
    if (since > 0 && since % params_.alpha == 0 && static_cast<Index>(state_.buffer.size()) == params_.alpha) {
      run_detect(out.events);
    }
  }
  out.ell_hat = std::move(ell_hat);
  out.basis = state_.basis;
  state_.log.insert(state_.log.end(), out.events.begin(), out.events.end());
  return out;
}

Matrix Tracker::buffer_matrix(Index last) const {
  const Index count = std::min<Index>(last, static_cast<Index>(state_.buffer.size()));
  Matrix m(n_, count);
  const Index offset = static_cast<Index>(state_.buffer.size()) - count;
  for (Index c = 0; c < count; ++c) m.col(c) = state_.buffer[static_cast<std::size_t>(offset + c)].fill;
  return m;
}

void Tracker::run_update(int u, std::vector<Event>& events) {
  const Matrix fills = buffer_matrix(params_.alpha);
  TruncatedSvd svd = r_svd(fills, params_.r, params_.svd);
  if (params_.variant.reuse > 0) {
    Matrix wy(n_, fills.cols());
    std::vector<IndexSet> wm;
    wm.reserve(state_.buffer.size());
    for (Index c = 0; c < wy.cols(); ++c) {
      wy.col(c) = state_.buffer[static_cast<std::size_t>(c)].y;
      wm.push_back(state_.buffer[static_cast<std::size_t>(c)].missing);
    }
    ReuseResult rr = buffer_reuse_update(wy, wm, fills, params_.variant.reuse, params_.r, params_.fill, params_.svd);
    for (Index c = 0; c < wy.cols(); ++c) state_.buffer[static_cast<std::size_t>(c)].fill = rr.fills.col(c);
    svd = r_svd(rr.fills, params_.r, params_.svd);
  }
  state_.basis = std::make_shared<const BasisMatrix>(std::move(svd.basis));
  state_.k = u + 1;
  state_.frames_since_update = 0;
  const Index t = state_.t;
  events.push_back({t, EventKind::kSubspaceUpdated, state_.j, u, 0.0});
  if (u == params_.K) {
    state_.completions.push_back(t);
    state_.frozen.push_back(*state_.basis);
    if (params_.omega_evals <= 0.0) {
      const double sr = svd.values(params_.r - 1);
      state_.omega_evals = params_.omega_fraction * sr * sr / static_cast<double>(params_.alpha);
    }
    state_.phase = Phase::kDetect;
    state_.k = 1;
    events.push_back({t, EventKind::kUpdateComplete, state_.j, u, 0.0});
  }
}

void Tracker::run_detect(std::vector<Event>& events) {
  const Matrix fills = buffer_matrix(params_.alpha);
  const DetectResult res = detect_change(fills, state_.frozen.back(), state_.omega_evals, params_.alpha);
  if (!res.detected) return;
  const Index t = state_.t;
  state_.detections.push_back(t);
  state_.anchor = t;
  state_.phase = Phase::kUpdate;
  state_.k = 1;
  ++state_.j;
  events.push_back({t, EventKind::kChangeDetected, state_.j, 0, res.statistic});
}

std::vector<Event> Tracker::finish() {
  std::vector<Event> events;
  if (!params_.final_partial_update || state_.phase != Phase::kUpdate) return events;
  const Index pending = std::min<Index>(state_.frames_since_update, static_cast<Index>(state_.buffer.size()));
  if (pending < params_.r) return events;
  const Matrix fills = buffer_matrix(pending);
  state_.basis = std::make_shared<const BasisMatrix>(r_svd(fills, params_.r, params_.svd).basis);
  state_.frames_since_update = 0;
  events.push_back({state_.t, EventKind::kSubspaceUpdated, state_.j, state_.k, 0.0});
  state_.log.insert(state_.log.end(), events.begin(), events.end());
  return events;
}

bool operator==(const Tracker& a, const Tracker& b) {
  const auto& x = a.state_;
  const auto& y = b.state_;
  if (a.n_ != b.n_ || x.phase != y.phase || x.j != y.j || x.k != y.k || x.t != y.t || x.anchor != y.anchor) return false;
  if (x.detections != y.detections || x.completions != y.completions || x.log != y.log) return false;
  if (x.omega_evals != y.omega_evals || x.frames_since_update != y.frames_since_update) return false;
  if (x.basis->matrix() != y.basis->matrix() || x.frozen.size() != y.frozen.size()) return false;
  for (std::size_t i = 0; i < x.frozen.size(); ++i) {
    if (x.frozen[i].matrix() != y.frozen[i].matrix()) return false;
  }
  if (x.buffer.size() != y.buffer.size()) return false;
  for (std::size_t i = 0; i < x.buffer.size(); ++i) {
    const auto& f = x.buffer[i];
    const auto& g = y.buffer[i];
    if (f.t != g.t || f.y != g.y || f.missing != g.missing || f.fill != g.fill) return false;
  }
  const auto& p = a.params_;
  const auto& q = b.params_;
  return p.r == q.r && p.K == q.K && p.alpha == q.alpha && p.omega_evals == q.omega_evals &&
         p.omega_fraction == q.omega_fraction && p.fill.cgls_tol == q.fill.cgls_tol &&
         p.fill.cgls_max_iter == q.fill.cgls_max_iter && p.fill.max_condition == q.fill.max_condition &&
         p.svd.max_iter == q.svd.max_iter && p.svd.tol == q.svd.tol && p.svd.oversample == q.svd.oversample &&
         p.svd.seed == q.svd.seed && p.variant.mode == q.variant.mode && p.variant.beta == q.variant.beta &&
         p.variant.reuse == q.variant.reuse && p.final_partial_update == q.final_partial_update &&
         p.project_smoothed == q.project_smoothed;
}

// -------------------------------------------------------------- checkpoint
//
// Line-oriented CSV. Every record starts with a tag; doubles use the shortest
// round-trip representation so a save/load cycle is bit-exact.

namespace {

void put_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << ',' << io::format_double(v(i));
}

void put_matrix(std::ostream& out, std::string_view tag, const Matrix& m) {
  out << tag << ',' << m.rows() << ',' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    out << "row";
    put_vector(out, m.row(i).transpose());
    out << '\n';
  }
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}
  std::vector<std::string_view> next() {
    if (!std::getline(in_, buf_)) throw ParseError("unexpected end of checkpoint", line_);
    ++line_;
    return io::split(buf_);
  }
  long line() const { return line_; }

 private:
  std::istream& in_;
  std::string buf_;
  long line_ = 0;
};

void expect(const std::vector<std::string_view>& f, std::string_view tag, std::size_t count, long line) {
  if (f.empty() || f[0] != tag || (count && f.size() != count)) {
    throw ParseError("expected '" + std::string(tag) + "' record", line);
  }
}

Vector read_row(LineReader& rd, Index len) {
  const auto f = rd.next();
  expect(f, "row", static_cast<std::size_t>(len) + 1, rd.line());
  Vector v(len);
  for (Index i = 0; i < len; ++i) v(i) = io::parse_double(f[static_cast<std::size_t>(i) + 1], rd.line());
  return v;
}

Matrix read_matrix(LineReader& rd, std::string_view tag) {
  const auto f = rd.next();
  expect(f, tag, 3, rd.line());
  const Index rows = io::parse_index(f[1], rd.line());
  const Index cols = io::parse_index(f[2], rd.line());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) m.row(i) = read_row(rd, cols).transpose();
  return m;
}

}  // namespace

void Tracker::save_checkpoint(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  const auto& p = params_;
  out << "norst-checkpoint,1\n";
  out << "n," << n_ << '\n';
  out << "params," << p.r << ',' << p.K << ',' << p.alpha << ',' << io::format_double(p.omega_evals) << ','
      << io::format_double(p.omega_fraction) << ',' << io::format_double(p.fill.cgls_tol) << ','
      << p.fill.cgls_max_iter << ',' << io::format_double(p.fill.max_condition) << ',' << p.svd.max_iter << ','
      << io::format_double(p.svd.tol) << ',' << p.svd.oversample << ',' << p.svd.seed << ','
      << p.variant.name() << ',' << (p.final_partial_update ? 1 : 0) << ',' << (p.project_smoothed ? 1 : 0) << '\n';
  const auto& s = state_;
  out << "state," << (s.phase == Phase::kUpdate ? "update" : "detect") << ',' << s.j << ',' << s.k << ',' << s.t << ','
      << s.anchor << ',' << io::format_double(s.omega_evals) << ',' << s.frames_since_update << '\n';
  out << "detections";
  for (Index t : s.detections) out << ',' << t;
  out << "\ncompletions";
  for (Index t : s.completions) out << ',' << t;
  out << '\n';
  put_matrix(out, "basis", s.basis->matrix());
  out << "frozen," << s.frozen.size() << '\n';
  for (const auto& f : s.frozen) put_matrix(out, "basis", f.matrix());
  out << "buffer," << s.buffer.size() << '\n';
  for (const auto& f : s.buffer) {
    out << "frame," << f.t << '\n';
    out << "row";
    put_vector(out, f.y);
    out << "\nmissing";
    for (Index i : f.missing) out << ',' << i;
    out << "\nrow";
    put_vector(out, f.fill);
    out << '\n';
  }
  out << "events," << s.log.size() << '\n';
  for (const auto& e : s.log) {
    out << "event," << e.t << ',' << to_string(e.kind) << ',' << e.j << ',' << e.k << ','
        << io::format_double(e.statistic) << '\n';
  }
}

Tracker Tracker::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint '" + path.string() + "'", 0);
  LineReader rd(in);
  expect(rd.next(), "norst-checkpoint", 2, rd.line());
  auto f = rd.next();
  expect(f, "n", 2, rd.line());
  Tracker tr;
  tr.n_ = io::parse_index(f[1], rd.line());

  f = rd.next();
  expect(f, "params", 16, rd.line());
  const long ln = rd.line();
  auto& p = tr.params_;
  p.r = io::parse_index(f[1], ln);
  p.K = static_cast<int>(io::parse_index(f[2], ln));
  p.alpha = io::parse_index(f[3], ln);
  p.omega_evals = io::parse_double(f[4], ln);
  p.omega_fraction = io::parse_double(f[5], ln);
  p.fill.cgls_tol = io::parse_double(f[6], ln);
  p.fill.cgls_max_iter = static_cast<int>(io::parse_index(f[7], ln));
  p.fill.max_condition = io::parse_double(f[8], ln);
  p.svd.max_iter = static_cast<int>(io::parse_index(f[9], ln));
  p.svd.tol = io::parse_double(f[10], ln);
  p.svd.oversample = io::parse_index(f[11], ln);
  {
    const auto sv = io::trim(f[12]);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), seed);
    if (ec != std::errc() || ptr != sv.data() + sv.size()) throw ParseError("bad svd seed", ln);
    p.svd.seed = seed;
  }
  // The variant name may itself contain ':' but never ','.
  p.variant = VariantParams::parse(io::trim(f[13]));
  p.final_partial_update = io::parse_index(f[14], ln) != 0;
  p.project_smoothed = io::parse_index(f[15], ln) != 0;
  p.validate();
  tr.schedule_ = sliding_window_schedule(p.alpha, p.variant.beta, p.K);

  f = rd.next();
  expect(f, "state", 8, rd.line());
  auto& s = tr.state_;
  if (f[1] == "update") {
    s.phase = Phase::kUpdate;
  } else if (f[1] == "detect") {
    s.phase = Phase::kDetect;
  } else {
    throw ParseError("bad phase", rd.line());
  }
  s.j = static_cast<int>(io::parse_index(f[2], rd.line()));
  s.k = static_cast<int>(io::parse_index(f[3], rd.line()));
  s.t = io::parse_index(f[4], rd.line());
  s.anchor = io::parse_index(f[5], rd.line());
  s.omega_evals = io::parse_double(f[6], rd.line());
  s.frames_since_update = io::parse_index(f[7], rd.line());

  f = rd.next();
  expect(f, "detections", 0, rd.line());
  for (std::size_t i = 1; i < f.size(); ++i) s.detections.push_back(io::parse_index(f[i], rd.line()));
  f = rd.next();
  expect(f, "completions", 0, rd.line());
  for (std::size_t i = 1; i < f.size(); ++i) s.completions.push_back(io::parse_index(f[i], rd.line()));

  s.basis = std::make_shared<const BasisMatrix>(BasisMatrix::trusted(read_matrix(rd, "basis")));
  f = rd.next();
  expect(f, "frozen", 2, rd.line());
  const Index nfrozen = io::parse_index(f[1], rd.line());
  for (Index i = 0; i < nfrozen; ++i) s.frozen.push_back(BasisMatrix::trusted(read_matrix(rd, "basis")));

  f = rd.next();
  expect(f, "buffer", 2, rd.line());
  const Index nbuf = io::parse_index(f[1], rd.line());
  for (Index i = 0; i < nbuf; ++i) {
    BufferedFrame bf;
    f = rd.next();
    expect(f, "frame", 2, rd.line());
    bf.t = io::parse_index(f[1], rd.line());
    bf.y = read_row(rd, tr.n_);
    f = rd.next();
    expect(f, "missing", 0, rd.line());
    std::vector<Index> idx;
    for (std::size_t k = 1; k < f.size(); ++k) idx.push_back(io::parse_index(f[k], rd.line()));
    bf.missing = IndexSet(std::move(idx), tr.n_);
    bf.fill = read_row(rd, tr.n_);
    s.buffer.push_back(std::move(bf));
  }

  f = rd.next();
  expect(f, "events", 2, rd.line());
  const Index nev = io::parse_index(f[1], rd.line());
  for (Index i = 0; i < nev; ++i) {
    f = rd.next();
    expect(f, "event", 6, rd.line());
    Event e;
    e.t = io::parse_index(f[1], rd.line());
    e.kind = parse_event_kind(f[2]);
    e.j = static_cast<int>(io::parse_index(f[3], rd.line()));
    e.k = static_cast<int>(io::parse_index(f[4], rd.line()));
    e.statistic = io::parse_double(f[5], rd.line());
    s.log.push_back(e);
  }
  return tr;
}

// --------------------------------------------------------------- smoothing

Matrix smooth(const Matrix& y, std::span<const IndexSet> missing, const TrackerState& state, const FillSettings& fill,
              bool project) {
  const Index d = y.cols();
  if (static_cast<Index>(missing.size()) != d) throw ShapeMismatch("smooth: one index set per frame required");
  std::vector<BasisMatrix> bases = state.frozen;
  std::vector<Index> ends = state.completions;
  if (state.phase == Phase::kUpdate && state.basis && !state.basis->is_zero()) {
    bases.push_back(*state.basis);
    ends.push_back(d);
  }
  Matrix out = y;
  if (bases.empty()) {
    for (Index t = 0; t < d; ++t) {
      for (Index i : missing[static_cast<std::size_t>(t)]) out(i, t) = 0.0;
    }
    return out;
  }
  // Interval j covers frames (ends[j-1], ends[j]]; the tail reuses the last basis.
  ends.back() = std::max(ends.back(), d);
  Index start = 1;
  for (std::size_t j = 0; j < bases.size(); ++j) {
    const Index stop = std::min(ends[j], d);
    if (stop < start) continue;
    const BasisMatrix basis = j == 0 ? bases[0] : union_basis(bases[j - 1], bases[j]);
    const Index len = stop - start + 1;
    BatchFill bf = fill_batch(y.middleCols(start - 1, len), missing.subspan(static_cast<std::size_t>(start - 1), static_cast<std::size_t>(len)), basis, fill);
    for (Index c = 0; c < len; ++c) {
      if (bf.failed[static_cast<std::size_t>(c)] && j > 0) {
        try {
          bf.ell_hat.col(c) = project_ls_fill(y.col(start - 1 + c), missing[static_cast<std::size_t>(start - 1 + c)], bases[j], fill).ell_hat;
          if (project) bf.ell_hat.col(c) = bases[j].project(bf.ell_hat.col(c));
          continue;
        } catch (const IllConditioned&) {
        }
      }
      if (project && !bf.failed[static_cast<std::size_t>(c)]) bf.ell_hat.col(c) = basis.project(bf.ell_hat.col(c));
    }
    out.middleCols(start - 1, len) = bf.ell_hat;
    start = stop + 1;
  }
  return out;
}

CompletionRun run_completion(const ObservationStream& stream, const TrackerParams& params) {
  if (stream.y.rows() != stream.n || stream.y.cols() != stream.d ||
      static_cast<Index>(stream.missing.size()) != stream.d) {
    throw ShapeMismatch("run_completion: stream shape inconsistent");
  }
  Tracker tracker(stream.n, params);
  CompletionRun run;
  run.online.resize(stream.n, stream.d);
  run.bases.reserve(static_cast<std::size_t>(stream.d));
  for (Index t = 0; t < stream.d; ++t) {
    FrameOutput fo = tracker.step(stream.y.col(t), stream.missing[static_cast<std::size_t>(t)]);
    run.online.col(t) = fo.ell_hat;
    run.bases.push_back(std::move(fo.basis));
  }
  tracker.finish();
  run.state = tracker.state();
  run.completed = smooth(stream.y, stream.missing, run.state, params.fill, params.project_smoothed);
  return run;
}

Matrix complete_matrix(const ObservationStream& stream, const TrackerParams& params) {
  return run_completion(stream, params).completed;
}

}  // namespace norst
