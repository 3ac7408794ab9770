#include "gatediag/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gatediag {

namespace {

constexpr double kPositivityFloor = 1e-12;
constexpr double kRegimeMargin = 0.03;

// Least squares of v on u with log-space r^2.
FitResult log_space_fit(FitModel model, std::span<const double> x,
                        std::span<const double> y) {
  std::vector<double> u, v;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] <= kPositivityFloor) continue;
    if (model == FitModel::PowerLaw && !(x[k] > 0.0)) continue;
    u.push_back(model == FitModel::PowerLaw ? std::log(x[k]) : x[k]);
    v.push_back(std::log(y[k]));
  }
  if (u.size() < 3)
    throw estimation_error("curve fit: need >= 3 strictly positive points");

  const double n = static_cast<double>(u.size());
  double su = 0, sv = 0;
  for (std::size_t k = 0; k < u.size(); ++k) { su += u[k]; sv += v[k]; }
  const double mu = su / n, mv = sv / n;
  double suu = 0, suv = 0, svv = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    suu += (u[k] - mu) * (u[k] - mu);
    suv += (u[k] - mu) * (v[k] - mv);
    svv += (v[k] - mv) * (v[k] - mv);
  }
  FitResult fit;
  fit.model = model;
  fit.n_points = static_cast<int>(u.size());
  if (suu == 0.0)
    throw estimation_error("curve fit: degenerate abscissa");
  const double slope = suv / suu;
  fit.rate = -slope;
  fit.amplitude = std::exp(mv - slope * mu);
  if (svv == 0.0) {
    fit.r_squared = 1.0;  // constant data, exactly reproduced
    fit.zero_variance = true;
  } else {
    double ss_res = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double r = v[k] - (mv + slope * (u[k] - mu));
      ss_res += r * r;
    }
    fit.r_squared = 1.0 - ss_res / svv;
  }
  return fit;
}

}  // namespace

FitResult fit_exponential(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw contract_error("fit: length mismatch");
  return log_space_fit(FitModel::Exponential, x, y);
}

FitResult fit_powerlaw(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw contract_error("fit: length mismatch");
  return log_space_fit(FitModel::PowerLaw, x, y);
}

std::string regime_name(RegimeClass regime) {
  switch (regime) {
    case RegimeClass::Exponential: return "exponential";
    case RegimeClass::Algebraic: return "algebraic";
    case RegimeClass::Ambiguous: return "ambiguous";
  }
  return "?";
}

RegimeVerdict classify_regime(std::span<const double> x,
                              std::span<const double> y) {
  RegimeVerdict verdict;
  verdict.exponential = fit_exponential(x, y);
  verdict.powerlaw = fit_powerlaw(x, y);
  const double gap = verdict.exponential.r_squared - verdict.powerlaw.r_squared;
  if (gap >= kRegimeMargin)
    verdict.regime = RegimeClass::Exponential;
  else if (gap <= -kRegimeMargin)
    verdict.regime = RegimeClass::Algebraic;
  else
    verdict.regime = RegimeClass::Ambiguous;
  return verdict;
}

RegimeVerdict classify_regime(const EnvelopeCurve& curve) {
  std::vector<double> x(curve.lag_grid.begin(), curve.lag_grid.end());
  return classify_regime(x, curve.f_values);
}

TauSpectrum tau_spectrum(const EffRateTensor& tensor) {
  if (tensor.lag_grid.size() < 3)
    throw contract_error("tau_spectrum: need >= 3 lags");
  std::vector<double> x(tensor.lag_grid.begin(), tensor.lag_grid.end());
  const Mat& mags = tensor.abs_values.size() == tensor.values.size() &&
                            tensor.abs_values.size() > 0
                        ? tensor.abs_values
                        : tensor.values;

  TauSpectrum spectrum;
  const auto H = mags.cols();
  spectrum.neurons.resize(static_cast<std::size_t>(H));
  std::vector<double> column(x.size());
  for (Eigen::Index q = 0; q < H; ++q) {
    for (std::size_t k = 0; k < x.size(); ++k)
      column[k] = std::abs(mags(static_cast<Eigen::Index>(k), q));
    NeuronScale& scale = spectrum.neurons[static_cast<std::size_t>(q)];
    try {
      const FitResult fit = fit_exponential(x, column);
      if (fit.rate > 0.0) {
        scale.tau = 1.0 / fit.rate;
        scale.amplitude = fit.amplitude;
        scale.r_squared = fit.r_squared;
      } else {
        scale.absent = true;  // no positive decay on this grid
      }
    } catch (const estimation_error&) {
      scale.absent = true;
    }
  }

  const EnvelopeCurve env = envelope(tensor);
  spectrum.env_fit = fit_exponential(x, env.f_values);
  spectrum.tau_env = spectrum.env_fit.rate > 0.0
                         ? 1.0 / spectrum.env_fit.rate
                         : std::numeric_limits<double>::quiet_NaN();
  return spectrum;
}

CcdfCurve ccdf(std::vector<double> values) {
  if (values.empty()) throw contract_error("ccdf: empty value set");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  CcdfCurve curve;
  std::size_t k = 0;
  while (k < values.size()) {
    std::size_t j = k;
    while (j < values.size() && values[j] == values[k]) ++j;
    curve.thresholds.push_back(values[k]);
    curve.survival.push_back(static_cast<double>(values.size() - k) / n);
    k = j;
  }
  return curve;
}

double ccdf_at(const CcdfCurve& curve, double threshold) {
  // Survival of the empirical law: fraction of values >= threshold.
  double s = 0.0;
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k)
    if (curve.thresholds[k] >= threshold) { s = curve.survival[k]; break; }
  return s;
}

}  // namespace gatediag
