#include "norst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "norst/io.hpp"

namespace norst {

ErrorSeries subspace_error_series(std::span<const std::shared_ptr<const BasisMatrix>> bases, const GroundTruth& truth,
                                  std::span<const Event> events, const Matrix* fills, Index first_t) {
  if (fills && (fills->rows() != truth.n || fills->cols() < first_t - 1 + static_cast<Index>(bases.size()))) {
    throw DimensionMismatch("subspace_error_series: fills do not cover the basis history");
  }
  ErrorSeries out;
  out.events.assign(events.begin(), events.end());
  out.records.reserve(bases.size());

  // Bases are shared between frames; only recompute when the pointer or the
  // truth subspace changes.
  const BasisMatrix* last_basis = nullptr;
  std::size_t last_truth = static_cast<std::size_t>(-1);
  double last_err = 1.0;
  std::size_t ev = 0;
  int j = 0;
  int k = 0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const Index t = first_t + static_cast<Index>(i);
    if (t > truth.d) throw DimensionMismatch("subspace_error_series: history longer than the stream");
    const std::size_t ti = truth.subspace_index(t);
    const BasisMatrix* b = bases[i].get();
    if (b != last_basis || ti != last_truth) {
      if (b->ambient_dim() != truth.n) throw DimensionMismatch("subspace_error_series: basis dimension");
      last_err = b->is_zero() ? 1.0 : sin_theta_max(*b, truth.subspaces[ti]);
      last_basis = b;
      last_truth = ti;
    }
    ErrorRecord rec;
    rec.t = t;
    rec.sin_theta = last_err;
    rec.rel_col_err = std::numeric_limits<double>::quiet_NaN();
    if (fills) {
      const auto col = truth.clean.col(t - 1);
      const double denom = col.norm();
      if (denom > 0.0) rec.rel_col_err = (fills->col(t - 1) - col).norm() / denom;
    }
    while (ev < events.size() && events[ev].t < t) ++ev;
    while (ev < events.size() && events[ev].t == t) {
      const Event& e = events[ev++];
      if (!rec.event.empty()) rec.event += ';';
      rec.event += to_string(e.kind);
      if (e.kind == EventKind::kSubspaceUpdated) {
        j = e.j;
        k = e.k;
      } else if (e.kind == EventKind::kChangeDetected) {
        j = e.j;
        k = 0;
      }
    }
    rec.j = j;
    rec.k = k;
    out.records.push_back(std::move(rec));
  }
  return out;
}

double rel_frobenius(const Matrix& l_hat, const Matrix& l) {
  if (l_hat.rows() != l.rows() || l_hat.cols() != l.cols()) throw ShapeMismatch("rel_frobenius: shapes differ");
  const double denom = l.norm();
  if (!(denom > 0.0)) throw ZeroMatrix("rel_frobenius: reference matrix is zero");
  return (l_hat - l).norm() / denom;
}

DetectionReport detection_report(std::span<const Event> events, std::span<const Index> change_times, Index alpha) {
  DetectionReport rep;
  rep.delays.assign(change_times.size(), std::nullopt);
  for (const Event& e : events) {
    if (e.kind == EventKind::kChangeDetected) rep.detections.push_back(e.t);
  }
  std::sort(rep.detections.begin(), rep.detections.end());
  for (Index th : rep.detections) {
    // Nearest preceding change time.
    std::optional<std::size_t> match;
    for (std::size_t j = 0; j < change_times.size(); ++j) {
      if (change_times[j] <= th) match = j;
    }
    if (match && !rep.delays[*match] && th - change_times[*match] <= 4 * alpha) {
      rep.delays[*match] = th - change_times[*match];
    } else {
      rep.false_alarms.push_back(th);
    }
  }
  for (const auto& d : rep.delays) {
    if (!d) ++rep.misses;
  }
  return rep;
}

std::optional<Index> samples_to_threshold(const ErrorSeries& series, double threshold, Index alpha) {
  Index run = 0;
  for (const auto& rec : series.records) {
    run = rec.sin_theta <= threshold ? run + 1 : 0;
    if (run == alpha) return rec.t;
  }
  return std::nullopt;
}

std::vector<double> per_update_errors(const ErrorSeries& series) {
  std::vector<double> out;
  for (const auto& rec : series.records) {
    if (rec.event.find(to_string(EventKind::kSubspaceUpdated)) != std::string::npos) out.push_back(rec.sin_theta);
  }
  return out;
}

void write_error_series_csv(const std::filesystem::path& path, const ErrorSeries& series) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "t,sin_theta,rel_col_err,j,k,event\n";
  for (const auto& r : series.records) {
    out << r.t << ',' << io::format_double(r.sin_theta) << ',' << io::format_double(r.rel_col_err) << ',' << r.j << ','
        << r.k << ',' << r.event << '\n';
  }
}

}  // namespace norst
