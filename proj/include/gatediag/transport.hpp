#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gatediag/cells.hpp"
#include "gatediag/common.hpp"

namespace gatediag {

enum class RateOrder { ZerothOnly, ZerothPlusFirst };

RateOrder parse_order(std::string_view name);
std::string order_name(RateOrder order);

// Per-lag, per-neuron effective learning rates, averaged over anchors and
// (after merging) sequences. `values` keeps the signed mean; `abs_values`
// keeps the mean magnitude, which is what the envelope and the time-scale
// fits consume. Zeroth-order rates are nonnegative, so there the two agree.
struct EffRateTensor {
  std::vector<int> lag_grid;  // strictly increasing, >= 1
  Mat values;                 // lags x H
  Mat abs_values;             // lags x H; empty means "use |values|"
  RateOrder order = RateOrder::ZerothOnly;
  long n_anchors = 0;
  long n_sequences = 0;
};

struct EnvelopeCurve {
  std::vector<int> lag_grid;
  std::vector<double> f_values;  // nonnegative
};

// Product of the given square matrices in reverse-chronological application
// order (last step applied first on the left). Empty input yields the
// identity of size `dim_if_empty`.
Mat jacobian_product(std::span<const Mat> jacobians, int dim_if_empty = -1);

// First-order expansion of prod(T_j + R_j): the pure retention product plus
// every single-insertion correction. Lists are chronological, matching
// jacobian_product.
Mat first_order_transport(std::span<const Mat> retention,
                          std::span<const Mat> mixing);

// Anchor times usable for every lag up to max_lag: all 1-based t with
// t - max_lag >= 1, optionally strided. The set is lag-independent so that
// averaged magnitudes stay monotone in the lag.
std::vector<int> default_anchors(int seq_len, int max_lag, int stride = 1);

// Per-step retention and mixing diagonals of one trajectory, shared by
// every anchor of the sequence.
struct RateWorkspace {
  std::vector<Vec> retain;  // gate-diagonal part of each step Jacobian
  std::vector<Vec> mix;     // mixing diagonal (cell-row block for LSTM)
  std::vector<Vec> mix_h;   // LSTM only: hidden-row mixing diagonal
};

RateWorkspace prepare_rate_workspace(const CellKind& kind,
                                     const CellParams& params,
                                     std::span<const StepCache> caches,
                                     RateOrder order);

// Rates of a single anchor over the whole lag grid (lags x H). First-order
// terms are the diagonal single-insertion corrections, accumulated by an
// O(H) per-lag recursion; off-diagonal components are discarded.
Mat per_anchor_rates(const CellKind& kind, std::span<const StepCache> caches,
                     const RateWorkspace& ws, const std::vector<int>& lag_grid,
                     int anchor_t, double mu, RateOrder order);

// Effective learning rates for one sequence, averaged over the given
// anchors.
EffRateTensor effective_rates(const CellKind& kind, const CellParams& params,
                              std::span<const StepCache> caches,
                              const std::vector<int>& lag_grid,
                              const std::vector<int>& anchors, double mu,
                              RateOrder order);

// Pools per-sequence tensors; call in a fixed sequence order.
void merge_rates(EffRateTensor& acc, const EffRateTensor& part);

// l1 aggregation over neurons of the mean rate magnitudes.
EnvelopeCurve envelope(const EffRateTensor& tensor);

// Rounds a real-valued grid to distinct integer lags (nearest, deduplicated).
std::vector<int> integer_lag_grid(double min_lag, double max_lag, int count);

}  // namespace gatediag
