#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "norst/datagen.hpp"
#include "norst/fill.hpp"
#include "norst/variants.hpp"

namespace norst {

struct TrackerParams {
  Index r = 1;
  int K = 1;          ///< subspace updates per detected change
  Index alpha = 2;    ///< mini-batch length
  /// Detection threshold in variance units. Values <= 0 select the data-driven
  /// threshold omega_fraction * lambda_min_hat, re-estimated at the end of
  /// every update cycle from the r-th singular value of the buffer.
  double omega_evals = 0.0;
  double omega_fraction = 8e-4;
  FillSettings fill;
  SvdOptions svd;
  VariantParams variant;
  /// At end of stream, run one last update on a partial buffer of >= r frames.
  bool final_partial_update = true;
  /// Smoothing projects each re-filled column onto its interval basis, which
  /// also denoises the observed coordinates.
  bool project_smoothed = false;

  void validate() const;
};

enum class Phase { kUpdate, kDetect };

enum class EventKind { kSubspaceUpdated, kChangeDetected, kUpdateComplete, kFillFailed };

struct Event {
  Index t = 0;
  EventKind kind = EventKind::kSubspaceUpdated;
  int j = 0;  ///< subspace index the event belongs to
  int k = 0;  ///< update number within the cycle (0 when not applicable)
  double statistic = 0.0;

  friend bool operator==(const Event&, const Event&) = default;
};

const char* to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct BufferedFrame {
  Index t = 0;
  Vector y;
  IndexSet missing;
  Vector fill;
};

struct TrackerState {
  Phase phase = Phase::kUpdate;
  int j = 0;           ///< index of the subspace currently estimated
  int k = 1;           ///< next update number in the current cycle
  Index t = 0;         ///< frames consumed
  Index anchor = 1;    ///< first frame of the current update cycle
  std::shared_ptr<const BasisMatrix> basis;  ///< current estimate P_hat_(t)
  std::deque<BufferedFrame> buffer;          ///< last alpha frames, oldest first
  std::vector<Index> detections;             ///< t_hat_j for j >= 1
  std::vector<Index> completions;            ///< t_hat_{j,fin}
  std::vector<BasisMatrix> frozen;           ///< P_hat_j at completion
  double omega_evals = 0.0;
  Index frames_since_update = 0;
  std::vector<Event> log;
};

struct FrameOutput {
  Index t = 0;
  Vector ell_hat;
  std::shared_ptr<const BasisMatrix> basis;  ///< P_hat_(t) after this frame
  std::vector<Event> events;
  bool failed = false;
};

/// top-r left singular basis of the alpha-column buffer.
BasisMatrix subspace_update(const Matrix& buffer, Index r, const SvdOptions& svd = {});

struct DetectResult {
  bool detected = false;
  double statistic = 0.0;  ///< lambda_max(B B'), B = (I - P P') buffer
};

DetectResult detect_change(const Matrix& buffer, const BasisMatrix& p_prev, double omega_evals, Index alpha);

/// Smallest orthonormal basis spanning both inputs. Directions of b that are
/// already in span(a) to within `tol` are dropped.
BasisMatrix union_basis(const BasisMatrix& a, const BasisMatrix& b, double tol = 1e-8);

/// Single-writer state machine: feed frames in order with step().
class Tracker {
 public:
  Tracker(Index n, TrackerParams params);
  /// Starts from an initial estimate instead of the zero subspace; the first
  /// update cycle begins at `anchor`.
  Tracker(Index n, TrackerParams params, BasisMatrix initial, Index anchor);

  FrameOutput step(const Vector& y, const IndexSet& missing);

  /// Advances the schedule with a fill computed elsewhere (robust mode).
  /// `buffer_fill` defaults to `ell_hat`.
  FrameOutput advance(const Vector& y, const IndexSet& missing, Vector ell_hat, bool failed = false,
                      const Vector* buffer_fill = nullptr);

  /// End of stream: optional partial update so the final basis is never zero.
  std::vector<Event> finish();

  const TrackerState& state() const noexcept { return state_; }
  const TrackerParams& params() const noexcept { return params_; }
  const BasisMatrix& basis() const noexcept { return *state_.basis; }
  Index ambient_dim() const noexcept { return n_; }
  const UpdateSchedule& schedule() const noexcept { return schedule_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  static Tracker load_checkpoint(const std::filesystem::path& path);

  friend bool operator==(const Tracker& a, const Tracker& b);

 private:
  Tracker() = default;
  void run_update(int u, std::vector<Event>& events);
  void run_detect(std::vector<Event>& events);
  Matrix buffer_matrix(Index last) const;

  Index n_ = 0;
  TrackerParams params_;
  UpdateSchedule schedule_;
  TrackerState state_;
};

/// Re-fills every frame against the union of adjacent frozen estimates.
/// Frames after the last completed cycle use the final estimate.
Matrix smooth(const Matrix& y, std::span<const IndexSet> missing, const TrackerState& state,
              const FillSettings& fill = {}, bool project = false);

struct CompletionRun {
  Matrix completed;  ///< smoothed L_hat
  Matrix online;     ///< online fills ell_hat_t
  std::vector<std::shared_ptr<const BasisMatrix>> bases;  ///< P_hat_(t) per frame
  TrackerState state;
};

/// Tracks the whole stream, then smooths. Returns every intermediate product.
CompletionRun run_completion(const ObservationStream& stream, const TrackerParams& params);

/// n x d completed matrix L_hat.
Matrix complete_matrix(const ObservationStream& stream, const TrackerParams& params);

}  // namespace norst
