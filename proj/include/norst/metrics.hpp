#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "norst/datagen.hpp"
#include "norst/tracker.hpp"

namespace norst {

struct ErrorRecord {
  Index t = 0;
  double sin_theta = 0.0;
  double rel_col_err = 0.0;  ///< NaN when no fills were supplied
  int j = 0;
  int k = 0;
  std::string event;  ///< ';'-joined event kinds at t, empty if none
};

struct ErrorSeries {
  std::vector<ErrorRecord> records;
  std::vector<Event> events;
};

/// Per-frame sin_theta_max(P_hat_(t), P_(t)). `fills` (n x d, optional) adds
/// ||l_hat_t - l_t|| / ||l_t||. Records start at `first_t`.
ErrorSeries subspace_error_series(std::span<const std::shared_ptr<const BasisMatrix>> bases, const GroundTruth& truth,
                                  std::span<const Event> events = {}, const Matrix* fills = nullptr,
                                  Index first_t = 1);

/// ||L_hat - L||_F / ||L||_F. Throws ZeroMatrix when ||L||_F = 0.
double rel_frobenius(const Matrix& l_hat, const Matrix& l);

struct DetectionReport {
  std::vector<Index> detections;       ///< every t_hat, in order
  std::vector<std::optional<Index>> delays;  ///< per true change: t_hat - t_j, or nullopt if missed
  std::vector<Index> false_alarms;     ///< t_hat with no unmatched t_j in [t_hat - 4 alpha, t_hat]
  Index misses = 0;
};

DetectionReport detection_report(std::span<const Event> events, std::span<const Index> change_times, Index alpha);

/// First t with sin_theta <= threshold on every frame of [t, t + alpha - 1];
/// returns t + alpha - 1, the frame where the sustained window completes.
std::optional<Index> samples_to_threshold(const ErrorSeries& series, double threshold, Index alpha);

/// sin_theta right after each update event, in order. Useful for decay checks.
std::vector<double> per_update_errors(const ErrorSeries& series);

struct RunReport {
  double rel_frobenius = 0.0;
  std::map<double, std::optional<Index>> samples;
  DetectionReport detection;
  double ms_per_frame = 0.0;
};

/// CSV with header t,sin_theta,rel_col_err,j,k,event.
void write_error_series_csv(const std::filesystem::path& path, const ErrorSeries& series);

}  // namespace norst
