#include "gatediag/learnability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gatediag/rng.hpp"

namespace gatediag {

namespace {
constexpr double kAlignmentFloor = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double threshold_prefactor(double epsilon, double c_alpha) {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw std::domain_error("detection error must lie in (0, 1/2)");
  if (!(c_alpha > 0.0)) throw std::domain_error("c_alpha must be > 0");
  return std::sqrt(std::log(1.0 / (2.0 * epsilon))) / std::sqrt(c_alpha);
}
}  // namespace

ProbeVector draw_probe(std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw contract_error("draw_probe: dimension must be >= 1");
  Rng rng(derive_seed(seed, "probe"));
  ProbeVector probe;
  probe.seed = seed;
  probe.w.resize(static_cast<Eigen::Index>(dim));
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index i = 0; i < probe.w.size(); ++i) probe.w(i) = rng.normal();
    norm = probe.w.norm();
  }
  probe.w /= norm;
  return probe;
}

namespace {

// Copies the probe entries onto a parameter-shaped record, in canonical
// tensor order. Readout components stay in the record but never influence
// the state tangent.
ModelParams probe_as_direction(const ModelParams& model, const ProbeVector& probe) {
  if (static_cast<std::size_t>(probe.w.size()) != param_count(model))
    throw contract_error("probe dimension does not match the model");
  ModelParams dir = zeros_like(model);
  std::size_t offset = 0;
  for_each_tensor(dir, [&](const char*, double* d, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) d[k] = probe.w(static_cast<Eigen::Index>(offset + k));
    offset += n;
  });
  return dir;
}

Vec sigmoid(const Vec& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

Mat tangent_states(const CellKind& kind, const ModelParams& model,
                   const Mat& inputs, const ProbeVector& probe) {
  const CellParams& p = model.cell;
  const ModelParams dir = probe_as_direction(model, probe);
  const CellParams& d = dir.cell;
  const int H = p.hidden_dim;
  const auto T = inputs.rows();

  Mat out(T, H);
  Vec h = Vec::Zero(H), u = Vec::Zero(H);
  Vec c, u_c;
  if (has_cell_state(kind)) {
    c = Vec::Zero(H);
    u_c = Vec::Zero(H);
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    const Vec x = inputs.row(t).transpose();
    switch (kind.tag) {
      case CellTag::ConstGate: {
        const double s = kind.const_gate_value;
        const Vec cand = (p.W_h * x + p.U_h * h + p.b_h).array().tanh().matrix();
        const Vec da = d.W_h * x + d.U_h * h + p.U_h * u + d.b_h;
        const Vec dcand = ((1.0 - cand.array().square()) * da.array()).matrix();
        u = (1.0 - s) * u + s * dcand;
        h = (1.0 - s) * h + s * cand;
        break;
      }
      case CellTag::SharedGate: {
        const double a_s = p.w_s.dot(x) + p.u_s.dot(h) + p.b_s_scalar;
        const double s = 1.0 / (1.0 + std::exp(-a_s));
        const double das =
            d.w_s.dot(x) + d.u_s.dot(h) + p.u_s.dot(u) + d.b_s_scalar;
        const double ds = s * (1.0 - s) * das;
        const Vec cand = (p.W_h * x + p.U_h * h + p.b_h).array().tanh().matrix();
        const Vec da = d.W_h * x + d.U_h * h + p.U_h * u + d.b_h;
        const Vec dcand = ((1.0 - cand.array().square()) * da.array()).matrix();
        u = (1.0 - s) * u + ds * (cand - h) + s * dcand;
        h = (1.0 - s) * h + s * cand;
        break;
      }
      case CellTag::DiagGate: {
        const Vec s = sigmoid(p.W_s * x + p.U_s * h + p.b_s);
        const Vec das = d.W_s * x + d.U_s * h + p.U_s * u + d.b_s;
        const Vec ds = (s.array() * (1.0 - s.array()) * das.array()).matrix();
        const Vec cand = (p.W_h * x + p.U_h * h + p.b_h).array().tanh().matrix();
        const Vec da = d.W_h * x + d.U_h * h + p.U_h * u + d.b_h;
        const Vec dcand = ((1.0 - cand.array().square()) * da.array()).matrix();
        u = ((1.0 - s.array()) * u.array() +
             ds.array() * (cand - h).array() +
             s.array() * dcand.array()).matrix();
        h = ((1.0 - s.array()) * h.array() + s.array() * cand.array()).matrix();
        break;
      }
      case CellTag::GRU: {
        const Vec z = sigmoid(p.W_z * x + p.U_z * h + p.b_z);
        const Vec r = sigmoid(p.W_r * x + p.U_r * h + p.b_r);
        const Vec daz = d.W_z * x + d.U_z * h + p.U_z * u + d.b_z;
        const Vec dar = d.W_r * x + d.U_r * h + p.U_r * u + d.b_r;
        const Vec dz = (z.array() * (1.0 - z.array()) * daz.array()).matrix();
        const Vec dr = (r.array() * (1.0 - r.array()) * dar.array()).matrix();
        const Vec rh = (r.array() * h.array()).matrix();
        const Vec drh = (dr.array() * h.array() + r.array() * u.array()).matrix();
        const Vec cand = (p.W_h * x + p.U_h * rh + p.b_h).array().tanh().matrix();
        const Vec da = d.W_h * x + d.U_h * rh + p.U_h * drh + d.b_h;
        const Vec dcand = ((1.0 - cand.array().square()) * da.array()).matrix();
        u = ((1.0 - z.array()) * u.array() +
             dz.array() * (cand - h).array() +
             z.array() * dcand.array()).matrix();
        h = ((1.0 - z.array()) * h.array() + z.array() * cand.array()).matrix();
        break;
      }
      case CellTag::LSTM: {
        const Vec i = sigmoid(p.W_i * x + p.U_i * h + p.b_i);
        const Vec f = sigmoid(p.W_f * x + p.U_f * h + p.b_f);
        const Vec o = sigmoid(p.W_o * x + p.U_o * h + p.b_o);
        const Vec g = (p.W_g * x + p.U_g * h + p.b_g).array().tanh().matrix();
        const Vec dai = d.W_i * x + d.U_i * h + p.U_i * u + d.b_i;
        const Vec daf = d.W_f * x + d.U_f * h + p.U_f * u + d.b_f;
        const Vec dao = d.W_o * x + d.U_o * h + p.U_o * u + d.b_o;
        const Vec dag = d.W_g * x + d.U_g * h + p.U_g * u + d.b_g;
        const Vec di = (i.array() * (1.0 - i.array()) * dai.array()).matrix();
        const Vec df = (f.array() * (1.0 - f.array()) * daf.array()).matrix();
        const Vec dof = (o.array() * (1.0 - o.array()) * dao.array()).matrix();
        const Vec dg = ((1.0 - g.array().square()) * dag.array()).matrix();
        const Vec c_new = (f.array() * c.array() + i.array() * g.array()).matrix();
        const Vec dc = (df.array() * c.array() + f.array() * u_c.array() +
                        di.array() * g.array() + i.array() * dg.array()).matrix();
        const Vec tanh_c = c_new.array().tanh().matrix();
        const Vec dtanh = ((1.0 - tanh_c.array().square()) * dc.array()).matrix();
        u = (dof.array() * tanh_c.array() + o.array() * dtanh.array()).matrix();
        h = (o.array() * tanh_c.array()).matrix();
        c = c_new;
        u_c = dc;
        break;
      }
    }
    out.row(t) = has_cell_state(kind) ? u_c.transpose() : u.transpose();
  }
  return out;
}

Vec neuron_alignments(const ModelParams& model, const CellKind& kind,
                      const Sequence& seq, int anchor_t, int lag,
                      const ProbeVector& probe) {
  const auto T = seq.inputs.rows();
  if (anchor_t < 1 || anchor_t > T || lag < 1 || anchor_t - lag < 1)
    throw contract_error("neuron_alignments: invalid anchor/lag");
  const Trajectory traj = run_sequence(kind, model.cell, seq.inputs);
  const Mat tangents = tangent_states(kind, model, seq.inputs, probe);

  const Vec& h_t = traj.states[static_cast<std::size_t>(anchor_t - 1)].h;
  const double residual =
      model.w_out.dot(h_t) + model.b_out - seq.targets(anchor_t - 1);
  const Vec delta = 2.0 * residual * model.w_out;
  return (delta.array() *
          tangents.row(anchor_t - lag - 1).transpose().array()).matrix();
}

double matched_statistic(std::span<const double> zeta,
                         std::span<const double> mu,
                         std::span<const int> signs) {
  if (zeta.size() != mu.size() || zeta.size() != signs.size())
    throw contract_error("matched_statistic: length mismatch");
  double s = 0.0;
  for (std::size_t q = 0; q < zeta.size(); ++q)
    s += mu[q] * static_cast<double>(signs[q]) * zeta[q];
  return s;
}

AlignmentEstimate estimate_alignment(const Mat& zeta_samples, const Vec& mu) {
  if (zeta_samples.rows() < 2)
    throw contract_error("estimate_alignment: need >= 2 sequences");
  if (zeta_samples.cols() != mu.size())
    throw contract_error("estimate_alignment: neuron count mismatch");
  const double mu_mass = mu.cwiseAbs().sum();
  if (!(mu_mass > 0.0))
    throw estimation_error("estimate_alignment: degenerate (all-zero) envelope");

  AlignmentEstimate est;
  const Vec mean = zeta_samples.colwise().mean().transpose();
  est.mean_abs = mean.cwiseAbs();
  est.signs.resize(static_cast<std::size_t>(mean.size()));
  for (Eigen::Index q = 0; q < mean.size(); ++q)
    est.signs[static_cast<std::size_t>(q)] = mean(q) < 0.0 ? -1 : 1;
  // Magnitude-weighted alignment: |mu| weights keep the summary invariant
  // under a joint sign flip of a rate and its alignments.
  est.m_bar_mu = mu.cwiseAbs().dot(est.mean_abs) / mu_mass;
  return est;
}

NoiseProfile fit_noise(const MatchedSamples& matched) {
  if (matched.lag_grid.empty())
    throw contract_error("fit_noise: empty matched sample set");
  NoiseProfile profile;
  profile.lag_grid = matched.lag_grid;
  profile.fits.reserve(matched.lag_grid.size());
  std::vector<double> alphas;
  for (std::size_t k = 0; k < matched.lag_grid.size(); ++k) {
    const auto& samples = matched.statistics[k];
    if (samples.size() < 100)
      throw contract_error("fit_noise: need >= 100 samples per lag");
    std::vector<double> centered(samples);
    std::sort(centered.begin(), centered.end());
    const double median = quantile_type7(centered, 0.5);
    for (double& v : centered) v -= median;
    profile.fits.push_back(mcculloch_estimate(centered));
    alphas.push_back(profile.fits.back().alpha_hat);
  }
  std::sort(alphas.begin(), alphas.end());
  profile.alpha_pooled = quantile_type7(alphas, 0.5);
  return profile;
}

ThresholdCurve detectability_threshold(const NoiseProfile& profile,
                                       std::span<const double> m_bar,
                                       double n_budget, double epsilon,
                                       double c_alpha) {
  if (m_bar.size() != profile.lag_grid.size())
    throw contract_error("detectability_threshold: grid mismatch");
  if (!(n_budget >= 1.0))
    throw std::domain_error("detectability_threshold: N must be >= 1");
  if (!(profile.alpha_pooled > 1.0))
    throw std::domain_error(
        "detectability_threshold: pooled tail index must exceed 1");

  ThresholdCurve curve;
  curve.lag_grid = profile.lag_grid;
  curve.n_budget = n_budget;
  curve.epsilon = epsilon;
  curve.c_alpha = c_alpha;
  curve.alpha_pooled = profile.alpha_pooled;
  curve.m_bar.assign(m_bar.begin(), m_bar.end());
  const double kappa = kappa_alpha(profile.alpha_pooled);
  const double pre = threshold_prefactor(epsilon, c_alpha);
  const double n_pow = std::pow(n_budget, 1.0 / kappa);
  curve.eps_th.resize(profile.lag_grid.size());
  for (std::size_t k = 0; k < profile.lag_grid.size(); ++k) {
    if (m_bar[k] < kAlignmentFloor) {
      curve.eps_th[k] = kInf;
      continue;
    }
    curve.eps_th[k] =
        profile.fits[k].sigma_hat / (n_pow * m_bar[k]) * pre;
  }
  return curve;
}

double sample_complexity(double f_value, double sigma, double m_bar,
                         double alpha, double epsilon, double c_alpha) {
  const double kappa = kappa_alpha(alpha);
  threshold_prefactor(epsilon, c_alpha);  // domain checks
  if (!(f_value > 0.0) || m_bar < kAlignmentFloor) return kInf;
  const double log_term = std::log(1.0 / (2.0 * epsilon));
  const double kappa_eps =
      std::pow(c_alpha, -kappa / 2.0) * std::pow(log_term, kappa / 2.0);
  return kappa_eps * std::pow(sigma / (m_bar * f_value), kappa);
}

int empirical_window(const EnvelopeCurve& envelope,
                     const ThresholdCurve& threshold) {
  if (envelope.lag_grid != threshold.lag_grid)
    throw contract_error("empirical_window: lag grid mismatch");
  int window = 0;
  for (std::size_t k = 0; k < envelope.lag_grid.size(); ++k)
    if (envelope.f_values[k] >= threshold.eps_th[k])
      window = envelope.lag_grid[k];
  return window;
}

TheoreticalWindow theoretical_window(DecayFamily family, double amplitude,
                                     double rate, double n_budget,
                                     double alpha, double threshold_constant) {
  if (!(amplitude > 0.0))
    throw std::domain_error("theoretical_window: amplitude must be > 0");
  if (!(threshold_constant > 0.0))
    throw std::domain_error("theoretical_window: threshold constant must be > 0");
  if (!(n_budget >= 1.0))
    throw std::domain_error("theoretical_window: N must be >= 1");
  const double kappa = kappa_alpha(alpha);
  const double level = threshold_constant * std::pow(n_budget, -1.0 / kappa);

  TheoreticalWindow result;
  switch (family) {
    case DecayFamily::Exponential: {
      if (!(rate > 0.0 && rate < 1.0))
        throw std::domain_error("theoretical_window: lambda must lie in (0, 1)");
      result.inverse_real = std::log(amplitude / level) / std::log(1.0 / rate);
      result.asymptote = std::log(n_budget) / (kappa * std::log(1.0 / rate));
      break;
    }
    case DecayFamily::Polynomial: {
      if (!(rate > 0.0))
        throw std::domain_error("theoretical_window: beta must be > 0");
      result.inverse_real = std::pow(amplitude / level, 1.0 / rate);
      result.asymptote = std::pow(amplitude / threshold_constant, 1.0 / rate) *
                         std::pow(n_budget, 1.0 / (kappa * rate));
      break;
    }
    case DecayFamily::Logarithmic: {
      result.inverse_real = std::expm1(amplitude / level);
      result.asymptote = std::expm1((amplitude / threshold_constant) *
                                    std::pow(n_budget, 1.0 / kappa));
      break;
    }
  }
  result.window = result.inverse_real >= 1.0
                      ? static_cast<long>(std::floor(result.inverse_real))
                      : 0;
  return result;
}

SandwichVerdict sandwich_check(const EnvelopeCurve& envelope,
                               std::span<const double> sigma_per_lag,
                               std::span<const double> m_bar_per_lag,
                               double c_sigma, double C_sigma, double c_m,
                               double C_m, double alpha, double epsilon,
                               double n_budget) {
  SandwichVerdict verdict;
  if (!(c_sigma > 0.0 && c_sigma <= C_sigma && c_m > 0.0 && c_m <= C_m)) {
    verdict.pass = false;
    verdict.reason = "invalid bounds";
    return verdict;
  }
  const std::size_t n = envelope.lag_grid.size();
  if (sigma_per_lag.size() != n || m_bar_per_lag.size() != n)
    throw contract_error("sandwich_check: grid mismatch");

  const double kappa = kappa_alpha(alpha);
  const double log_term = std::log(1.0 / (2.0 * epsilon));
  const double kappa_eps = std::pow(log_term, kappa / 2.0);  // c_alpha = 1 here
  const double c_star = kappa_eps * std::pow(c_sigma / C_m, kappa);
  const double C_star = kappa_eps * std::pow(C_sigma / c_m, kappa);
  const double tol = 1e-9;

  // Per-lag complexity band.
  for (std::size_t k = 0; k < n; ++k) {
    const double f = envelope.f_values[k];
    if (!(f > 0.0)) continue;  // infinite complexity on both sides
    const double n_of_ell =
        sample_complexity(f, sigma_per_lag[k], m_bar_per_lag[k], alpha, epsilon, 1.0);
    const double lo = c_star * std::pow(f, -kappa);
    const double hi = C_star * std::pow(f, -kappa);
    if (n_of_ell < lo * (1.0 - tol) || n_of_ell > hi * (1.0 + tol)) {
      verdict.pass = false;
      verdict.violating_lag = envelope.lag_grid[k];
      verdict.reason = "per-lag sample complexity left the bounded band";
      return verdict;
    }
  }

  // Window band. The generalized inverse is evaluated on the envelope grid.
  const double pre = std::sqrt(log_term);
  const double n_pow = std::pow(n_budget, -1.0 / kappa);
  auto grid_inverse = [&](double level) {
    int window = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (envelope.f_values[k] >= level) window = envelope.lag_grid[k];
    return window;
  };
  int actual = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double eps_th =
        sigma_per_lag[k] * n_pow / m_bar_per_lag[k] * pre;
    if (envelope.f_values[k] >= eps_th) actual = envelope.lag_grid[k];
  }
  const int lower = grid_inverse(C_sigma / c_m * n_pow * pre);
  const int upper = grid_inverse(c_sigma / C_m * n_pow * pre);
  if (actual < lower || actual > upper) {
    verdict.pass = false;
    verdict.violating_lag = actual;
    verdict.reason = "window left the generalized-inverse band";
    return verdict;
  }
  return verdict;
}

}  // namespace gatediag
