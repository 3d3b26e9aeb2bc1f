#pragma once

#include <span>
#include <string>
#include <string_view>

#include "norst/fill.hpp"

namespace norst {

enum class VariantMode { kBasic, kSampleEfficient, kSlidingWindow, kBufferReuse, kSlidingPlusReuse };

/// Selects one of the update schedules layered over the basic tracker.
struct VariantParams {
  VariantMode mode = VariantMode::kBasic;
  Index beta = 0;  ///< sliding-window hop; 0 means alpha
  int reuse = 0;   ///< R, extra refill/SVD passes per update

  static VariantParams basic() { return {}; }
  static VariantParams sample_efficient() { return {VariantMode::kSampleEfficient, 0, 0}; }
  static VariantParams sliding(Index beta) { return {VariantMode::kSlidingWindow, beta, 0}; }
  static VariantParams buffer_reuse(int r) { return {VariantMode::kBufferReuse, 0, r}; }
  static VariantParams sliding_reuse(Index beta, int r) { return {VariantMode::kSlidingPlusReuse, beta, r}; }

  std::string name() const;
  /// Parses "basic", "sample-efficient", "sliding:BETA", "reuse:R", "sliding-reuse:BETA:R".
  static VariantParams parse(std::string_view text);
};

/// When subspace updates fire relative to an anchor time a (the first frame
/// of the current update cycle): t = a + alpha - 1 + m * hop for
/// m = 0 .. updates - 1. hop == alpha is the basic schedule.
struct UpdateSchedule {
  Index alpha = 1;
  Index hop = 1;
  int updates = 1;

  /// Update number (1-based) that fires at time t, or 0.
  int update_at(Index t, Index anchor) const;
  /// Time of the last update of the cycle.
  Index completion_time(Index anchor) const;
};

UpdateSchedule sliding_window_schedule(Index alpha, Index beta, int updates);

/// Coefficient least squares fill: a = (P_Omega)^+ y_Omega, ell_hat = P a.
/// Observed coordinates of ell_hat need not equal y. Throws IllConditioned
/// when |Omega| < r or the restricted basis has condition above max_condition.
Vector sample_efficient_fill(const Vector& y, const IndexSet& observed, const BasisMatrix& p_hat,
                             double max_condition = 1e8);

struct ReuseResult {
  BasisMatrix basis;
  Matrix fills;
};

/// Buffer reuse: P^0 = r-SVD(fills), then R times refill the raw window with
/// projected LS against the latest basis and recompute the r-SVD.
ReuseResult buffer_reuse_update(const Matrix& window_y, std::span<const IndexSet> window_missing,
                                const Matrix& fills, int reuse, Index r, const FillSettings& fill = {},
                                const SvdOptions& svd = {});

}  // namespace norst
