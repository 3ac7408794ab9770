#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gatediag/common.hpp"
#include "gatediag/stable.hpp"
#include "gatediag/task.hpp"
#include "gatediag/training.hpp"
#include "gatediag/transport.hpp"

namespace gatediag {

// Fixed random direction in the full parameter space (cell + readout),
// shared by every model and lag of a study.
struct ProbeVector {
  Vec w;  // unit norm
  std::uint64_t seed = 0;
};

ProbeVector draw_probe(std::size_t dim, std::uint64_t seed);

// Directional derivative of the transported state coordinate along the
// probe, for every step of one sequence (T x H). The transported coordinate
// is the hidden state, or the cell state for LSTM, matching the coordinate
// whose transport the effective rates summarize. One forward tangent pass
// yields the projection <B_q, w> for all neurons and lags at once.
Mat tangent_states(const CellKind& kind, const ModelParams& model,
                   const Mat& inputs, const ProbeVector& probe);

// zeta_q = delta_t^(q) * <B_q(t - lag), w> for one (sequence, anchor, lag).
Vec neuron_alignments(const ModelParams& model, const CellKind& kind,
                      const Sequence& seq, int anchor_t, int lag,
                      const ProbeVector& probe);

// Sign-oriented, rate-weighted aggregation across neurons.
double matched_statistic(std::span<const double> zeta,
                         std::span<const double> mu,
                         std::span<const int> signs);

struct AlignmentEstimate {
  std::vector<int> signs;  // +-1, +1 on ties
  Vec mean_abs;            // |m_hat_q|
  double m_bar_mu = 0.0;   // envelope-normalized alignment magnitude
};

// Means over rows of zeta_samples (one row per sequence); requires >= 2
// rows and a not-all-zero rate vector.
AlignmentEstimate estimate_alignment(const Mat& zeta_samples, const Vec& mu);

struct MatchedSamples {
  std::vector<int> lag_grid;
  std::vector<std::vector<double>> statistics;  // [lag][sequence]
  std::vector<std::vector<int>> signs;          // [lag][neuron]
  std::vector<Vec> mean_abs;                    // [lag] |m_hat_q|
  std::vector<double> m_bar;                    // [lag]
};

struct NoiseProfile {
  std::vector<int> lag_grid;
  std::vector<StableFit> fits;
  double alpha_pooled = 2.0;  // median over lags
};

// Median-centers each lag's statistics and fits the stable parameters.
NoiseProfile fit_noise(const MatchedSamples& matched);

struct ThresholdCurve {
  std::vector<int> lag_grid;
  std::vector<double> eps_th;  // +inf where the alignment floor triggered
  double n_budget = 0.0;
  double epsilon = 0.05;
  double c_alpha = 1.0;
  double alpha_pooled = 2.0;
  std::vector<double> m_bar;
};

ThresholdCurve detectability_threshold(const NoiseProfile& profile,
                                       std::span<const double> m_bar,
                                       double n_budget, double epsilon,
                                       double c_alpha);

// Minimal sufficient sequence count; +inf when the envelope value vanishes.
double sample_complexity(double f_value, double sigma, double m_bar,
                         double alpha, double epsilon, double c_alpha);

// Largest lag whose envelope clears the threshold, 0 when none does.
int empirical_window(const EnvelopeCurve& envelope,
                     const ThresholdCurve& threshold);

enum class DecayFamily { Logarithmic, Polynomial, Exponential };

struct TheoreticalWindow {
  double inverse_real = 0.0;  // generalized inverse at the threshold level
  long window = 0;            // integer window implied by it
  double asymptote = 0.0;     // closed-form large-N prediction
};

// Exact generalized inverse of a canonical envelope family at the level
// threshold_constant * N^(-1/kappa). `rate` is lambda in (0,1) for the
// exponential family and beta > 0 for the polynomial one; it is ignored for
// the logarithmic family.
TheoreticalWindow theoretical_window(DecayFamily family, double amplitude,
                                     double rate, double n_budget,
                                     double alpha, double threshold_constant);

struct SandwichVerdict {
  bool pass = true;
  int violating_lag = -1;
  std::string reason;
};

// Checks the two-sided complexity band and the window band implied by the
// declared per-lag bounds on the noise scale and alignment.
SandwichVerdict sandwich_check(const EnvelopeCurve& envelope,
                               std::span<const double> sigma_per_lag,
                               std::span<const double> m_bar_per_lag,
                               double c_sigma, double C_sigma, double c_m,
                               double C_m, double alpha, double epsilon,
                               double n_budget);

struct WindowReport {
  std::vector<double> budgets;
  std::vector<int> windows;
};

}  // namespace gatediag
