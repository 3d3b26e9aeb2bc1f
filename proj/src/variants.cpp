#include "norst/variants.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace norst {

namespace {

long parse_int(std::string_view s, std::string_view what) {
  long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("variant: bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string VariantParams::name() const {
  switch (mode) {
    case VariantMode::kBasic:
      return "basic";
    case VariantMode::kSampleEfficient:
      return "sample-efficient";
    case VariantMode::kSlidingWindow:
      return "sliding:" + std::to_string(beta);
    case VariantMode::kBufferReuse:
      return "reuse:" + std::to_string(reuse);
    case VariantMode::kSlidingPlusReuse:
      return "sliding-reuse:" + std::to_string(beta) + ":" + std::to_string(reuse);
  }
  return "basic";
}

VariantParams VariantParams::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "basic" && rest.empty()) return basic();
  if (head == "sample-efficient" && rest.empty()) return sample_efficient();
  if (head == "sliding") return sliding(parse_int(rest, "beta"));
  if (head == "reuse") return buffer_reuse(static_cast<int>(parse_int(rest, "R")));
  if (head == "sliding-reuse") {
    const auto c2 = rest.find(':');
    if (c2 == std::string_view::npos) throw std::invalid_argument("variant: sliding-reuse needs BETA:R");
    return sliding_reuse(parse_int(rest.substr(0, c2), "beta"), static_cast<int>(parse_int(rest.substr(c2 + 1), "R")));
  }
  throw std::invalid_argument("unknown variant '" + std::string(text) + "'");
}

int UpdateSchedule::update_at(Index t, Index anchor) const {
  const Index first = anchor + alpha - 1;
  if (t < first) return 0;
  const Index off = t - first;
  if (off % hop != 0) return 0;
  const Index m = off / hop;
  return m < updates ? static_cast<int>(m + 1) : 0;
}

Index UpdateSchedule::completion_time(Index anchor) const {
  return anchor + alpha - 1 + static_cast<Index>(updates - 1) * hop;
}

UpdateSchedule sliding_window_schedule(Index alpha, Index beta, int updates) {
  if (alpha < 1 || updates < 1) throw std::invalid_argument("sliding_window_schedule: need alpha >= 1, K >= 1");
  if (beta == 0) beta = alpha;
  if (beta < 1 || beta > alpha) throw std::invalid_argument("sliding_window_schedule: need 1 <= beta <= alpha");
  return UpdateSchedule{alpha, beta, updates};
}

Vector sample_efficient_fill(const Vector& y, const IndexSet& observed, const BasisMatrix& p_hat,
                             double max_condition) {
  const Index n = y.size();
  if (p_hat.ambient_dim() != n) throw DimensionMismatch("sample_efficient_fill: basis and frame dimensions differ");
  const Index r = p_hat.rank();
  if (r == 0) return Vector::Zero(n);
  const Index m = observed.size();
  if (m < r) throw IllConditioned("sample_efficient_fill: fewer observed rows than r");
  Matrix po(m, r);
  Vector yo(m);
  for (Index k = 0; k < m; ++k) {
    po.row(k) = p_hat.matrix().row(observed[k]);
    yo(k) = y(observed[k]);
  }
  const SmallSvd sv = jacobi_svd(po);
  const double smax = sv.s(0);
  const double smin = sv.s(r - 1);
  if (!(smin > 0.0) || smax / smin > max_condition) {
    throw IllConditioned("sample_efficient_fill: restricted basis condition above limit");
  }
  const Vector a = Eigen::HouseholderQR<Matrix>(po).solve(yo);
  return p_hat.matrix() * a;
}

ReuseResult buffer_reuse_update(const Matrix& window_y, std::span<const IndexSet> window_missing,
                                const Matrix& fills, int reuse, Index r, const FillSettings& fill,
                                const SvdOptions& svd) {
  if (reuse < 0) throw std::invalid_argument("buffer_reuse_update: R must be >= 0");
  if (window_y.cols() != fills.cols() || window_y.rows() != fills.rows()) {
    throw ShapeMismatch("buffer_reuse_update: window and fills differ in shape");
  }
  ReuseResult out{r_svd(fills, r, svd).basis, fills};
  for (int pass = 0; pass < reuse; ++pass) {
    out.fills = fill_batch(window_y, window_missing, out.basis, fill).ell_hat;
    out.basis = r_svd(out.fills, r, svd).basis;
  }
  return out;
}

}  // namespace norst
