#pragma once

#include <optional>
#include <vector>

#include "norst/tracker.hpp"

namespace norst {

struct RobustParams {
  double x_min = 10.0;        ///< smallest outlier magnitude
  double xi = 0.0;            ///< CS residual bound; <= 0 means x_min / 15
  double omega_supp = 0.0;    ///< support threshold; <= 0 means x_min / 2
  bool auto_omega = false;    ///< per-frame 0.9 ||y_t|| / sqrt(n) instead of a fixed threshold
  Index t_train = 400;
  int altproj_iters = 500;
  double altproj_tol = 1e-3;
  double train_fill = 10.0;   ///< value written into missing entries for AltProj
  int cs_max_iter = 2000;
  double cs_tol = 1e-8;

  double effective_xi() const { return xi > 0.0 ? xi : x_min / 15.0; }
  double effective_omega() const { return omega_supp > 0.0 ? omega_supp : x_min / 2.0; }
  void validate(Index r) const;
};

struct SparseEstimate {
  Vector x_cs;
  IndexSet support;  ///< T_hat_t, always contains the known missing set
};

struct CsResult {
  Vector x;
  double residual = 0.0;  ///< ||y_tilde - Psi x||
  double lambda = 0.0;    ///< penalty of the returned iterate
  int iterations = 0;     ///< total proximal-gradient steps
  bool converged = false;
};

/// min ||x_{T^c}||_1 s.t. ||y_tilde - Psi x|| <= xi with Psi = I - P P'.
/// Solved as a weighted LASSO (zero weight on `t_known`) by FISTA, with the
/// penalty chosen by bisection so the residual meets the bound.
CsResult modified_cs(const Vector& y_tilde, const BasisMatrix& p_hat, const IndexSet& t_known, double xi,
                     int max_iter = 2000, double tol = 1e-8);

/// T_known united with {i : |x_i| > omega}.
IndexSet support_estimate(const Vector& x_cs, const IndexSet& t_known, double omega);

struct AltProjResult {
  BasisMatrix basis;
  Matrix low_rank;
  Matrix sparse;
  int iterations = 0;
  bool converged = false;
};

/// Rank-r robust PCA by alternating projections with a decaying hard threshold.
/// Missing entries of `y_train` should already hold a constant fill value.
AltProjResult altproj_init(const Matrix& y_train, Index r, int max_iter = 500, double tol = 1e-3,
                           const SvdOptions& svd = {});

struct RobustFrame {
  FrameOutput frame;
  SparseEstimate sparse;
  bool cs_converged = true;
};

/// Tracker schedule driven by robust fills (modified-CS, support
/// estimate, projected LS on the enlarged support).
class RobustTracker {
 public:
  /// `initial` is P_hat_0; the first update cycle starts at frame t_train + 1.
  RobustTracker(Index n, TrackerParams params, RobustParams robust, BasisMatrix initial);

  RobustFrame step(const Vector& y, const IndexSet& missing);
  /// Skips the CS step and uses the supplied support (oracle tests).
  RobustFrame step_with_support(const Vector& y, const IndexSet& missing, const IndexSet& support);
  std::vector<Event> finish() { return tracker_.finish(); }

  const Tracker& tracker() const noexcept { return tracker_; }
  const RobustParams& robust_params() const noexcept { return robust_; }

 private:
  RobustFrame fill_and_advance(const Vector& y, const IndexSet& support, Vector x_cs, bool cs_ok,
                               const IndexSet& missing);

  RobustParams robust_;
  Tracker tracker_;
};

struct RobustRun {
  Matrix completed;                 ///< smoothed L_hat, all d frames
  Matrix online;                    ///< online fills (training frames from AltProj)
  std::vector<IndexSet> supports;   ///< T_hat_t per frame
  std::vector<std::shared_ptr<const BasisMatrix>> bases;  ///< per frame; training frames hold P_hat_0
  AltProjResult init;
  TrackerState state;
  Index cs_failures = 0;
};

/// AltProj on the first t_train frames, robust tracking afterwards, then smoothing.
RobustRun run_robust(const ObservationStream& stream, const TrackerParams& params, const RobustParams& robust);

}  // namespace norst
