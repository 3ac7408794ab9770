#include "gatediag/stable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gatediag/common.hpp"
#include "gatediag/parallel.hpp"
#include "gatediag/rng.hpp"

namespace gatediag {

namespace {

constexpr std::size_t kSampleChunk = 1 << 16;

// Symmetric-case lookup tables (McCulloch 1986, beta = 0 columns).
// Table I: nu = (q95-q05)/(q75-q25) -> alpha.
constexpr double kNuNodes[] = {2.439, 2.5, 2.6, 2.7, 2.8, 3.0, 3.2, 3.5,
                               4.0,   5.0, 6.0, 8.0, 10.0, 15.0, 25.0};
constexpr double kAlphaAtNu[] = {2.000, 1.916, 1.808, 1.729, 1.664,
                                 1.563, 1.484, 1.391, 1.279, 1.128,
                                 1.029, 0.896, 0.818, 0.698, 0.593};
// Table III: alpha -> (q75-q25)/sigma.
constexpr double kAlphaGrid[] = {2.0, 1.9, 1.8, 1.7, 1.6, 1.5, 1.4, 1.3,
                                 1.2, 1.1, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
constexpr double kIqrOverSigma[] = {1.908, 1.914, 1.921, 1.927, 1.933, 1.939,
                                    1.946, 1.955, 1.965, 1.980, 2.000, 2.040,
                                    2.098, 2.189, 2.337, 2.588};

double cms_draw(double alpha, Rng& rng) {
  const double u = M_PI * (rng.uniform_open() - 0.5);  // (-pi/2, pi/2)
  const double w = -std::log(rng.uniform_open());      // Exp(1)
  if (alpha == 1.0) return std::tan(u);
  const double inv_alpha = 1.0 / alpha;
  const double t1 = std::sin(alpha * u) / std::pow(std::cos(u), inv_alpha);
  const double t2 =
      std::pow(std::cos(u - alpha * u) / w, (1.0 - alpha) * inv_alpha);
  return t1 * t2;
}

void fill_chunk(const StableParams& params, std::uint64_t seed,
                std::size_t chunk, std::span<double> out) {
  Rng rng(derive_seed(seed, "sas-chunk", chunk));
  for (double& x : out)
    x = params.location + params.sigma * cms_draw(params.alpha, rng);
}

double interp_alpha_from_nu(double nu, bool& clamped) {
  constexpr std::size_t n = std::size(kNuNodes);
  if (nu <= kNuNodes[0]) {
    clamped = nu < kNuNodes[0];
    return 2.0;
  }
  if (nu >= kNuNodes[n - 1]) {
    clamped = true;
    return 0.5;
  }
  std::size_t hi = 1;
  while (kNuNodes[hi] < nu) ++hi;
  const double frac = (nu - kNuNodes[hi - 1]) / (kNuNodes[hi] - kNuNodes[hi - 1]);
  clamped = false;
  return kAlphaAtNu[hi - 1] + frac * (kAlphaAtNu[hi] - kAlphaAtNu[hi - 1]);
}

double interp_iqr_over_sigma(double alpha) {
  constexpr std::size_t n = std::size(kAlphaGrid);
  if (alpha >= kAlphaGrid[0]) return kIqrOverSigma[0];
  if (alpha <= kAlphaGrid[n - 1]) return kIqrOverSigma[n - 1];
  std::size_t hi = 1;
  while (kAlphaGrid[hi] > alpha) ++hi;  // grid is decreasing
  const double frac =
      (kAlphaGrid[hi - 1] - alpha) / (kAlphaGrid[hi - 1] - kAlphaGrid[hi]);
  return kIqrOverSigma[hi - 1] +
         frac * (kIqrOverSigma[hi] - kIqrOverSigma[hi - 1]);
}

}  // namespace

void validate(const StableParams& params) {
  if (!(params.alpha > 0.0) || !(params.alpha <= 2.0))
    throw std::domain_error("stable: alpha must lie in (0, 2]");
  if (!(params.sigma > 0.0))
    throw std::domain_error("stable: sigma must be positive");
  if (!std::isfinite(params.location))
    throw std::domain_error("stable: location must be finite");
}

std::vector<double> sample_sas(const StableParams& params, std::size_t n,
                               std::uint64_t seed) {
  validate(params);
  if (n < 1) throw std::domain_error("sample_sas: n must be >= 1");
  std::vector<double> out(n);
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kSampleChunk;
    const std::size_t len = std::min(kSampleChunk, n - begin);
    fill_chunk(params, seed, c, {out.data() + begin, len});
  });
  return out;
}

std::vector<double> sample_sas_serial(const StableParams& params,
                                      std::size_t n, std::uint64_t seed) {
  validate(params);
  if (n < 1) throw std::domain_error("sample_sas: n must be >= 1");
  std::vector<double> out(n);
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kSampleChunk;
    const std::size_t len = std::min(kSampleChunk, n - begin);
    fill_chunk(params, seed, c, {out.data() + begin, len});
  }
  return out;
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw contract_error("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile: p outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

StableFit mcculloch_estimate(std::span<const double> samples) {
  if (samples.size() < 100)
    throw contract_error("mcculloch_estimate: need at least 100 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  const double q05 = quantile_type7(sorted, 0.05);
  const double q25 = quantile_type7(sorted, 0.25);
  const double q75 = quantile_type7(sorted, 0.75);
  const double q95 = quantile_type7(sorted, 0.95);
  const double iqr = q75 - q25;
  if (!(iqr > 0.0) || !std::isfinite(iqr))
    throw estimation_error("mcculloch_estimate: degenerate sample (zero interquartile range)");

  StableFit fit;
  fit.n_samples = samples.size();
  const double nu = (q95 - q05) / iqr;
  fit.alpha_hat = interp_alpha_from_nu(nu, fit.clamped);
  fit.sigma_hat = iqr / interp_iqr_over_sigma(fit.alpha_hat);
  return fit;
}

double kappa_alpha(double alpha) {
  if (!(alpha > 1.0) || !(alpha <= 2.0))
    throw std::domain_error("kappa_alpha: requires alpha in (1, 2]");
  return alpha / (alpha - 1.0);
}

double noise_floor(double sigma, double alpha, std::size_t n_sequences) {
  if (n_sequences < 1) throw std::domain_error("noise_floor: N must be >= 1");
  kappa_alpha(alpha);  // same domain restriction
  if (!(sigma > 0.0)) throw std::domain_error("noise_floor: sigma must be positive");
  return sigma * std::pow(static_cast<double>(n_sequences), 1.0 / alpha - 1.0);
}

}  // namespace gatediag
