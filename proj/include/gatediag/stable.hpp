#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gatediag {

struct StableParams {
  double alpha = 2.0;     // tail index, in (0, 2]
  double sigma = 1.0;     // scale, > 0
  double location = 0.0;  // center of symmetry
};

struct StableFit {
  double alpha_hat = 2.0;  // in [0.5, 2.0]
  double sigma_hat = 1.0;  // > 0
  std::size_t n_samples = 0;
  bool clamped = false;  // raw tail-index estimate fell outside the table
};

void validate(const StableParams& params);

// i.i.d. symmetric alpha-stable draws via the Chambers-Mallows-Stuck
// transform, under the characteristic function exp(-sigma^alpha |t|^alpha).
// At alpha = 2 this is a Gaussian with variance 2*sigma^2. Sampling is
// chunked with per-chunk substreams, so the output is identical for any
// worker count.
std::vector<double> sample_sas(const StableParams& params, std::size_t n,
                               std::uint64_t seed);
std::vector<double> sample_sas_serial(const StableParams& params,
                                      std::size_t n, std::uint64_t seed);

// Type-7 quantile (linear interpolation of order statistics) of an
// ascending-sorted sample.
double quantile_type7(std::span<const double> sorted, double p);

// Symmetric-case quantile estimator of (alpha, sigma): the ratio
// (q95-q05)/(q75-q25) is looked up in the embedded 1986 tables, linearly
// interpolated, and clamped to [0.5, 2.0] with the `clamped` flag set when
// the raw value left the table range. Requires >= 100 samples.
StableFit mcculloch_estimate(std::span<const double> samples);

// Concentration exponent alpha/(alpha-1); the empirical mean of N draws
// concentrates at rate N^(-1/kappa). Requires alpha > 1.
double kappa_alpha(double alpha);

// Scale of the mean of N i.i.d. SaS(0, sigma) terms: sigma * N^(1/alpha - 1).
double noise_floor(double sigma, double alpha, std::size_t n_sequences);

}  // namespace gatediag
