#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gatediag/learnability.hpp"
#include "gatediag/rng.hpp"
#include "oracles.hpp"

using namespace gatediag;

namespace {

Dataset toy_dataset(int D, int T, std::uint64_t seed, std::size_t n = 1) {
  TaskConfig cfg;
  cfg.input_dim = D;
  cfg.seq_len = T;
  cfg.lags = {2};
  cfg.coefficients = {0.8};
  cfg.noise_std = 0.1;
  cfg.direction = random_unit_vector(D, seed);
  cfg.seed = seed;
  return generate_task(cfg, n, seed + 1);
}

// An index-aligned probe with a single nonzero coordinate.
ProbeVector unit_probe(const ModelParams& model, std::size_t coordinate) {
  ProbeVector probe;
  probe.w = Vec::Zero(static_cast<Eigen::Index>(param_count(model)));
  probe.w(static_cast<Eigen::Index>(coordinate)) = 1.0;
  return probe;
}

}  // namespace

TEST_CASE("probe is unit, deterministic, centered") {
  const ProbeVector a = draw_probe(10000, 5);
  const ProbeVector b = draw_probe(10000, 5);
  CHECK(std::abs(a.w.norm() - 1.0) <= 1e-12);
  CHECK(a.w == b.w);
  CHECK(std::abs(a.w.mean()) < 3.0 / std::sqrt(10000.0));
  CHECK(draw_probe(10000, 6).w != a.w);
}

TEST_CASE("readout-aligned probes produce no alignment") {
  const CellKind kind = make_kind("gru");
  const Dataset data = toy_dataset(3, 8, 11);
  const ModelParams model = init_model(kind, 3, 4, 3);
  // The readout weight block sits right after the cell tensors.
  const ProbeVector probe = unit_probe(model, cell_param_count(model.cell) + 1);
  const Vec zeta = neuron_alignments(model, kind, data.sequences[0], 7, 3, probe);
  CHECK(zeta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("alignments are odd in the probe") {
  const CellKind kind = make_kind("diag");
  const Dataset data = toy_dataset(3, 9, 13);
  const ModelParams model = init_model(kind, 3, 4, 5);
  ProbeVector probe = draw_probe(param_count(model), 7);
  const Vec plus = neuron_alignments(model, kind, data.sequences[0], 8, 2, probe);
  probe.w = -probe.w;
  const Vec minus = neuron_alignments(model, kind, data.sequences[0], 8, 2, probe);
  CHECK((plus + minus).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("tangent propagation matches the finite-difference probe derivative") {
  Rng rng(2025);
  for (const char* name : {"const", "shared", "diag", "gru", "lstm"}) {
    const CellKind kind = make_kind(name, 0.4);
    const int D = 2, H = 3, T = 7;
    const Dataset data = toy_dataset(D, T, rng.next_u64());
    const ModelParams model = init_model(kind, D, H, rng.next_u64());
    const ProbeVector probe = draw_probe(param_count(model), rng.next_u64());

    const Mat tangents =
        tangent_states(kind, model, data.sequences[0].inputs, probe);

    // Central differences along the probe direction in parameter space.
    const double h = 1e-5;
    auto states_at = [&](double shift) {
      ModelParams shifted = model;
      std::size_t offset = 0;
      for_each_tensor(shifted, [&](const char*, double* d, std::size_t n) {
        for (std::size_t k = 0; k < n; ++k)
          d[k] += shift * probe.w(static_cast<Eigen::Index>(offset + k));
        offset += n;
      });
      const Trajectory traj =
          run_sequence(kind, shifted.cell, data.sequences[0].inputs);
      Mat out(T, H);
      for (int t = 0; t < T; ++t)
        out.row(t) = has_cell_state(kind)
                         ? traj.states[static_cast<std::size_t>(t)].c.transpose()
                         : traj.states[static_cast<std::size_t>(t)].h.transpose();
      return out;
    };
    const Mat fd = (states_at(h) - states_at(-h)) / (2.0 * h);
    const double denom = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK_MESSAGE((tangents - fd).cwiseAbs().maxCoeff() / denom < 1e-4, name);
  }
}

TEST_CASE("matched statistic arithmetic") {
  const double zeta1[] = {2.0};
  const double mu1[] = {0.5};
  const int sign1[] = {1};
  CHECK(matched_statistic(zeta1, mu1, sign1) == doctest::Approx(1.0));

  const double zeros[] = {0.0, 0.0, 0.0};
  const double mu3[] = {0.4, -0.2, 1.0};
  const int signs3[] = {1, -1, 1};
  CHECK(matched_statistic(zeros, mu3, signs3) == 0.0);

  const double bad[] = {1.0};
  CHECK_THROWS_AS(matched_statistic(bad, mu3, signs3), contract_error);
}

TEST_CASE("matched statistic factorizes at the expected alignments") {
  Rng rng(9);
  const int H = 6;
  Vec mu(H), means(H);
  for (int q = 0; q < H; ++q) {
    mu(q) = rng.uniform_open();  // nonnegative rates
    means(q) = rng.normal();
  }
  Mat samples(2, H);
  samples.row(0) = means.transpose();
  samples.row(1) = means.transpose();
  const AlignmentEstimate est = estimate_alignment(samples, mu);

  std::vector<double> zeta(means.data(), means.data() + H);
  std::vector<double> mu_v(mu.data(), mu.data() + H);
  const double s = matched_statistic(zeta, mu_v, est.signs);
  double direct = 0.0;
  for (int q = 0; q < H; ++q) direct += mu(q) * std::abs(means(q));
  const double f = mu.cwiseAbs().sum();
  CHECK(s == doctest::Approx(direct).epsilon(1e-12));
  CHECK(s == doctest::Approx(est.m_bar_mu * f).epsilon(1e-12));
  CHECK(s >= 0.0);
}

TEST_CASE("alignment estimation") {
  Mat zeta(2, 2);
  zeta << 2.0, -4.0, 2.0, -4.0;
  Vec mu(2);
  mu << 1.0, 3.0;
  const AlignmentEstimate est = estimate_alignment(zeta, mu);
  CHECK(est.mean_abs(0) == doctest::Approx(2.0));
  CHECK(est.mean_abs(1) == doctest::Approx(4.0));
  CHECK(est.signs[0] == 1);
  CHECK(est.signs[1] == -1);
  CHECK(est.m_bar_mu == doctest::Approx(3.5));

  // Joint sign flip of one rate and its samples leaves the summary alone.
  Mat flipped = zeta;
  flipped.col(1) = -zeta.col(1);
  Vec mu_flip = mu;
  mu_flip(1) = -mu(1);
  CHECK(estimate_alignment(flipped, mu_flip).m_bar_mu ==
        doctest::Approx(est.m_bar_mu));

  CHECK_THROWS_AS(estimate_alignment(zeta, Vec::Zero(2)), estimation_error);
  CHECK_THROWS_AS(estimate_alignment(Mat::Zero(1, 2), mu), contract_error);
}

TEST_CASE("noise fits recover injected stable parameters") {
  MatchedSamples matched;
  matched.lag_grid = {1, 2, 3};
  std::uint64_t seed = 100;
  for (int lag : matched.lag_grid) {
    const auto xs = sample_sas({1.5, 2.0, 0.7}, 20000, seed++);
    matched.statistics.push_back(xs);
    (void)lag;
  }
  const NoiseProfile profile = fit_noise(matched);
  for (const StableFit& fit : profile.fits) {
    CHECK(fit.alpha_hat == doctest::Approx(1.5).epsilon(0.07));
    CHECK(fit.sigma_hat == doctest::Approx(2.0).epsilon(0.05));
  }
  CHECK(profile.alpha_pooled == doctest::Approx(1.5).epsilon(0.07));

  // Gaussian injection pools at the edge of the table.
  MatchedSamples gauss;
  gauss.lag_grid = {1, 2};
  Rng rng(7);
  for (int k = 0; k < 2; ++k) {
    std::vector<double> xs(20000);
    for (double& x : xs) x = rng.normal();
    gauss.statistics.push_back(xs);
  }
  CHECK(fit_noise(gauss).alpha_pooled >= 1.95);

  // Location shifts are removed by the median centering.
  MatchedSamples shifted = matched;
  for (auto& xs : shifted.statistics)
    for (double& x : xs) x += 123.0;
  const NoiseProfile p2 = fit_noise(shifted);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(p2.fits[k].alpha_hat == doctest::Approx(profile.fits[k].alpha_hat));
    CHECK(p2.fits[k].sigma_hat == doctest::Approx(profile.fits[k].sigma_hat));
  }
}

TEST_CASE("threshold closed forms") {
  NoiseProfile profile;
  profile.lag_grid = {1};
  StableFit fit;
  fit.sigma_hat = 1.0;
  profile.fits = {fit};
  profile.alpha_pooled = 2.0;
  const double m_bar[] = {1.0};
  const double eps = 1.0 / (2.0 * std::exp(1.0));  // log term becomes 1

  ThresholdCurve c100 = detectability_threshold(profile, m_bar, 100, eps, 1.0);
  CHECK(c100.eps_th[0] == doctest::Approx(0.1).epsilon(1e-12));
  ThresholdCurve c400 = detectability_threshold(profile, m_bar, 400, eps, 1.0);
  CHECK(c400.eps_th[0] == doctest::Approx(0.05).epsilon(1e-12));

  profile.alpha_pooled = 1.5;  // kappa = 3
  ThresholdCurve c1000 = detectability_threshold(profile, m_bar, 1000, eps, 1.0);
  CHECK(c1000.eps_th[0] == doctest::Approx(0.1).epsilon(1e-12));

  const double tiny[] = {1e-13};
  ThresholdCurve blocked = detectability_threshold(profile, tiny, 10, eps, 1.0);
  CHECK(std::isinf(blocked.eps_th[0]));

  profile.alpha_pooled = 0.9;
  CHECK_THROWS_AS(detectability_threshold(profile, m_bar, 10, eps, 1.0),
                  std::domain_error);
}

TEST_CASE("sample complexity inverts the threshold") {
  const double eps = 1.0 / (2.0 * std::exp(1.0));
  CHECK(sample_complexity(0.1, 1.0, 1.0, 2.0, eps, 1.0) ==
        doctest::Approx(100.0).epsilon(1e-12));
  // Doubling the envelope divides the requirement by 2^kappa.
  const double n1 = sample_complexity(0.1, 1.0, 1.0, 2.0, eps, 1.0);
  const double n2 = sample_complexity(0.2, 1.0, 1.0, 2.0, eps, 1.0);
  CHECK(n1 / n2 == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(std::isinf(sample_complexity(0.0, 1.0, 1.0, 2.0, eps, 1.0)));

  // Round trip through the threshold at randomized inputs.
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const double alpha = 1.05 + 0.95 * rng.uniform01();
    const double sigma = 0.1 + 2.0 * rng.uniform01();
    const double m_bar = 0.1 + 2.0 * rng.uniform01();
    const double f = 0.01 + rng.uniform01();
    const double epsilon = 0.01 + 0.4 * rng.uniform01();
    const double c_alpha = 0.2 + 2.0 * rng.uniform01();
    const double n = sample_complexity(f, sigma, m_bar, alpha, epsilon, c_alpha);
    if (n < 1.0) continue;  // a budget below one sequence is out of domain

    NoiseProfile profile;
    profile.lag_grid = {1};
    StableFit fit;
    fit.sigma_hat = sigma;
    profile.fits = {fit};
    profile.alpha_pooled = alpha;
    const double mb[] = {m_bar};
    const ThresholdCurve curve =
        detectability_threshold(profile, mb, n, epsilon, c_alpha);
    CHECK(curve.eps_th[0] == doctest::Approx(f).epsilon(1e-9));
  }
}

TEST_CASE("empirical window level sets") {
  EnvelopeCurve env;
  ThresholdCurve thr;
  for (int lag = 1; lag <= 10; ++lag) {
    env.lag_grid.push_back(lag);
    env.f_values.push_back(std::pow(2.0, -lag));
    thr.lag_grid.push_back(lag);
    thr.eps_th.push_back(0.1);
  }
  CHECK(empirical_window(env, thr) == 3);

  ThresholdCurve high = thr;
  for (double& t : high.eps_th) t = 2.0;
  CHECK(empirical_window(env, high) == 0);

  ThresholdCurve zero = thr;
  for (double& t : zero.eps_th) t = 0.0;
  CHECK(empirical_window(env, zero) == 10);

  ThresholdCurve bad = thr;
  bad.lag_grid.pop_back();
  bad.eps_th.pop_back();
  CHECK_THROWS_AS(empirical_window(env, bad), contract_error);
}

TEST_CASE("theoretical window matches the sampled curve") {
  // Exponential family at a level that lands between grid lags.
  const double n_budget = 100.0;  // with c_thr = 1, level = 0.1 at alpha = 2
  const TheoreticalWindow tw = theoretical_window(
      DecayFamily::Exponential, 1.0, 0.5, n_budget, 2.0, 1.0);
  CHECK(tw.window == 3);
  CHECK(tw.inverse_real == doctest::Approx(std::log2(10.0)));

  EnvelopeCurve env;
  ThresholdCurve thr;
  for (int lag = 1; lag <= 16; ++lag) {
    env.lag_grid.push_back(lag);
    env.f_values.push_back(std::pow(0.5, lag));
    thr.lag_grid.push_back(lag);
    thr.eps_th.push_back(0.1);
  }
  CHECK(empirical_window(env, thr) == tw.window);
}

TEST_CASE("polynomial windows scale with the predicted exponent") {
  // kappa = 2, beta = 2: window ~ N^(1/4).
  const TheoreticalWindow a =
      theoretical_window(DecayFamily::Polynomial, 1.0, 2.0, 1e4, 2.0, 1.0);
  const TheoreticalWindow b =
      theoretical_window(DecayFamily::Polynomial, 1.0, 2.0, 1e8, 2.0, 1.0);
  CHECK(b.inverse_real / a.inverse_real == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(a.asymptote == doctest::Approx(a.inverse_real).epsilon(1e-9));
}

TEST_CASE("heavier tails compress the window by the exponent ratio") {
  const double n_budget = 1e4;
  const TheoreticalWindow light = theoretical_window(
      DecayFamily::Exponential, 1.0, 0.5, n_budget, 2.0, 1.0);
  const TheoreticalWindow heavy = theoretical_window(
      DecayFamily::Exponential, 1.0, 0.5, n_budget, 1.5, 1.0);
  CHECK(std::abs(heavy.inverse_real - (2.0 / 3.0) * light.inverse_real) <= 1.0);
  CHECK(std::abs(static_cast<double>(heavy.window) -
                 (2.0 / 3.0) * static_cast<double>(light.window)) <= 1.0);
}

TEST_CASE("sandwich check") {
  EnvelopeCurve env;
  for (int lag = 1; lag <= 30; ++lag) {
    env.lag_grid.push_back(lag);
    env.f_values.push_back(2.0 * std::pow(0.8, lag));
  }
  const double alpha = 1.6, eps = 0.05, n_budget = 500.0;

  // Degenerate bounds collapse to equality.
  std::vector<double> sigma(30, 0.7), m_bar(30, 1.3);
  CHECK(sandwich_check(env, sigma, m_bar, 0.7, 0.7, 1.3, 1.3, alpha, eps,
                       n_budget).pass);

  // Randomized profiles inside declared bounds always pass.
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(30), m(30);
    for (int k = 0; k < 30; ++k) {
      s[k] = 0.5 + 0.5 * rng.uniform01();
      m[k] = 1.0 + 0.8 * rng.uniform01();
    }
    const SandwichVerdict verdict =
        sandwich_check(env, s, m, 0.5, 1.0, 1.0, 1.8, alpha, eps, n_budget);
    CHECK_MESSAGE(verdict.pass, "trial ", trial, ": ", verdict.reason);
  }

  // A scale violating its declared cap is caught at the right lag.
  std::vector<double> s(30, 0.7), m(30, 1.3);
  s[17] = 5.0;
  const SandwichVerdict verdict =
      sandwich_check(env, s, m, 0.5, 1.0, 1.0, 1.8, alpha, eps, n_budget);
  CHECK_FALSE(verdict.pass);
  CHECK(verdict.violating_lag == 18);
}

TEST_CASE("windows grow with data and shrink with heavier tails") {
  EnvelopeCurve env;
  for (int lag = 1; lag <= 64; ++lag) {
    env.lag_grid.push_back(lag);
    env.f_values.push_back(std::pow(0.85, lag));
  }
  NoiseProfile profile;
  profile.lag_grid = env.lag_grid;
  StableFit fit;
  fit.sigma_hat = 0.5;
  profile.fits.assign(64, fit);
  const std::vector<double> m_bar(64, 1.0);

  for (double alpha : {2.0, 1.8, 1.5, 1.2}) {
    profile.alpha_pooled = alpha;
    int prev = -1;
    for (double n : {10.0, 100.0, 1000.0, 10000.0}) {
      const int w = empirical_window(
          env, detectability_threshold(profile, m_bar, n, 0.05, 1.0));
      if (prev >= 0) CHECK(w >= prev);
      prev = w;
    }
  }
  // Tail compression at fixed budget.
  int prev = 1 << 30;
  for (double alpha : {2.0, 1.8, 1.5, 1.2}) {
    profile.alpha_pooled = alpha;
    const int w = empirical_window(
        env, detectability_threshold(profile, m_bar, 500.0, 0.05, 1.0));
    CHECK(w <= prev);
    prev = w;
  }
}

TEST_CASE("threshold-complexity duality on a grid") {
  EnvelopeCurve env;
  NoiseProfile profile;
  std::vector<double> m_bar;
  Rng rng(31);
  for (int lag = 1; lag <= 40; ++lag) {
    env.lag_grid.push_back(lag);
    env.f_values.push_back(1.5 * std::pow(0.9, lag));
    profile.lag_grid.push_back(lag);
    StableFit fit;
    fit.sigma_hat = 0.3 + 0.4 * rng.uniform01();
    profile.fits.push_back(fit);
    m_bar.push_back(0.5 + rng.uniform01());
  }
  profile.alpha_pooled = 1.7;

  for (double n : {20.0, 200.0, 2000.0}) {
    const int via_threshold = empirical_window(
        env, detectability_threshold(profile, m_bar, n, 0.05, 1.0));
    int via_complexity = 0;
    for (std::size_t k = 0; k < env.lag_grid.size(); ++k) {
      const double needed =
          sample_complexity(env.f_values[k], profile.fits[k].sigma_hat,
                            m_bar[k], profile.alpha_pooled, 0.05, 1.0);
      if (needed <= n) via_complexity = env.lag_grid[k];
    }
    CHECK(via_threshold == via_complexity);
  }
}
