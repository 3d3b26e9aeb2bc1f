#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "norst/linalg.hpp"

namespace norst {

/// Planted model for a synthetic stream. Times are 1-based frame numbers:
/// subspace P_j is active for t_j <= t < t_{j+1}, with t_0 = 1.
struct GroundTruth {
  Index n = 0;
  Index d = 0;
  Index r = 0;
  std::vector<BasisMatrix> subspaces;  ///< P_0 .. P_J
  std::vector<Index> change_times;     ///< t_1 < ... < t_J
  Matrix coefficients;                 ///< r x d
  Matrix clean;                        ///< n x d, column t-1 = P_(t) a_t
  double noise_std = 0.0;

  /// Index j of the subspace active at frame t (1-based).
  std::size_t subspace_index(Index t) const;
  const BasisMatrix& subspace_at(Index t) const { return subspaces[subspace_index(t)]; }
};

/// Bounded-uniform coefficients: row i uniform on [-q_i, q_i] with
/// q_i = sqrt(f) - sqrt(f) (i - 1) / (2r) for i < r and q_r = 1.
struct CoefficientSpec {
  Index r = 1;
  double f = 1.0;
  /// Time-varying covariance: odd t shifts q_i (i < r) by +lambda_min/2, even t by -lambda_min/2.
  bool alternating = false;

  std::vector<double> half_widths() const;
  std::vector<double> half_widths_at(Index t) const;
  /// Diagonal of the coefficient covariance, q_i^2 / 3.
  std::vector<double> variances() const;
  double lambda_min() const;
  double lambda_max() const;
};

struct BernoulliSupport {
  double rho = 1.0;  ///< probability that an entry is observed
};

/// Contiguous block of s rows (cyclic) that advances ceil(s * b0) rows per frame.
struct MovingObjectSupport {
  Index s = 1;
  double b0 = 1.0;
  std::optional<Index> start;  ///< drawn from the seed when absent
};

struct ReplaySupport {
  std::vector<IndexSet> sets;
};

using SupportModel = std::variant<BernoulliSupport, MovingObjectSupport, ReplaySupport>;

enum class CollisionPolicy {
  kMask,   ///< drop outlier entries that land on missing entries
  kShift,  ///< shift the whole outlier set by one row until disjoint
};

struct OutlierSpec {
  SupportModel support = MovingObjectSupport{};
  double x_min = 10.0;
  double x_max = 25.0;
  bool random_sign = false;
  CollisionPolicy collision = CollisionPolicy::kMask;
};

struct SparseFrame {
  IndexSet support;
  std::vector<double> values;  ///< aligned with support
};

/// Observed data: y_t with missing coordinates zeroed, the missing sets T_t,
/// and (for synthetic streams) the outliers that were added.
struct ObservationStream {
  Index n = 0;
  Index d = 0;
  Matrix y;  ///< n x d
  std::vector<IndexSet> missing;
  std::optional<std::vector<SparseFrame>> outliers;
};

std::vector<BasisMatrix> gen_subspaces(Index n, Index r, Index changes, double gamma, std::uint64_t seed);

Matrix gen_coefficients(const CoefficientSpec& spec, Index d, std::uint64_t seed);

std::vector<IndexSet> gen_bernoulli_supports(Index n, Index d, double rho, std::uint64_t seed);

std::vector<IndexSet> gen_moving_object_supports(Index n, Index d, Index s, double b0, std::uint64_t seed,
                                                 std::optional<Index> start = std::nullopt);

/// Dispatches on the model. `stream_counter` keeps missing and outlier draws independent.
std::vector<IndexSet> gen_supports(const SupportModel& model, Index n, Index d, std::uint64_t seed,
                                   std::uint64_t stream_counter = 0);

std::vector<SparseFrame> gen_outliers(Index n, Index d, const OutlierSpec& spec,
                                      const std::vector<IndexSet>& missing, std::uint64_t seed);

/// Builds the planted model: subspaces, change times every `period` frames
/// (period <= 0 spreads `changes` evenly), coefficients and the clean matrix.
GroundTruth make_ground_truth(Index n, Index d, const CoefficientSpec& coeffs, Index changes, Index period,
                              double gamma, std::uint64_t seed);

ObservationStream assemble_stream(const GroundTruth& truth, const std::vector<IndexSet>& missing,
                                  const std::optional<std::vector<SparseFrame>>& outliers, double noise_std,
                                  std::uint64_t seed);

struct MissFracStats {
  double col = 0.0;        ///< max_t |T_t| / n
  double row_alpha = 0.0;  ///< max over length-alpha windows of the worst row's missing fraction
};

MissFracStats miss_frac_stats(const std::vector<IndexSet>& supports, Index n, Index alpha);

}  // namespace norst
