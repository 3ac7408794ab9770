#pragma once

#include <span>
#include <string>
#include <vector>

#include "gatediag/transport.hpp"

namespace gatediag {

enum class FitModel { Exponential, PowerLaw };

struct FitResult {
  FitModel model = FitModel::Exponential;
  double amplitude = 0.0;   // C resp. c
  double rate = 0.0;        // lambda resp. beta (minus the log-space slope)
  double r_squared = 0.0;   // in log space
  int n_points = 0;         // points above the positivity floor
  bool zero_variance = false;
};

// Least squares of log y on x; points at or below 1e-12 are excluded and
// counted out of n_points. Needs >= 3 usable points.
FitResult fit_exponential(std::span<const double> x, std::span<const double> y);
// Same on log x; additionally requires x > 0.
FitResult fit_powerlaw(std::span<const double> x, std::span<const double> y);

enum class RegimeClass { Exponential, Algebraic, Ambiguous };
std::string regime_name(RegimeClass regime);

struct RegimeVerdict {
  RegimeClass regime = RegimeClass::Ambiguous;
  FitResult exponential;
  FitResult powerlaw;
};

// Margin of 0.03 in r^2 decides; anything closer is ambiguous.
RegimeVerdict classify_regime(std::span<const double> x,
                              std::span<const double> y);
RegimeVerdict classify_regime(const EnvelopeCurve& curve);

struct NeuronScale {
  double tau = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  bool absent = false;  // too few positive points or no positive decay
};

struct TauSpectrum {
  std::vector<NeuronScale> neurons;
  double tau_env = 0.0;
  FitResult env_fit;
};

// Per-neuron exponential fits of the mean rate magnitudes; tau = 1/rate.
TauSpectrum tau_spectrum(const EffRateTensor& tensor);

struct CcdfCurve {
  std::vector<double> thresholds;  // sorted unique values
  std::vector<double> survival;    // P(value >= threshold), nonincreasing
};

CcdfCurve ccdf(std::vector<double> values);

// Survival probability at an arbitrary threshold.
double ccdf_at(const CcdfCurve& curve, double threshold);

}  // namespace gatediag
