#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gatediag/rng.hpp"
#include "gatediag/transport.hpp"
#include "oracles.hpp"

using namespace gatediag;

namespace {

Mat random_mat(int n, Rng& rng, double scale = 1.0) {
  Mat m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = scale * rng.normal();
  return m;
}

// Splits a one-step Jacobian into its retention part and the recurrent
// mixing remainder, mirroring the expansion the rate recursion uses.
void split_jacobian(const CellKind& kind, const StepCache& cache, const Mat& j,
                    Mat& retention, Mat& mixing) {
  const int H = static_cast<int>(cache.h_prev.size());
  if (kind.tag == CellTag::LSTM) {
    retention = Mat::Zero(2 * H, 2 * H);
    const Vec e =
        (cache.o.array() * (1.0 - cache.tanh_c.array().square())).matrix();
    retention.topRightCorner(H, H) =
        Mat((e.array() * cache.f.array()).matrix().asDiagonal());
    retention.bottomRightCorner(H, H) = Mat(cache.f.asDiagonal());
  } else {
    Vec r;
    if (kind.tag == CellTag::ConstGate || kind.tag == CellTag::SharedGate)
      r = Vec::Constant(H, 1.0 - cache.gate_scalar);
    else
      r = (1.0 - cache.gate.array()).matrix();
    retention = Mat(r.asDiagonal());
  }
  mixing = j - retention;
}

Mat random_inputs(int T, int D, Rng& rng) {
  Mat m(T, D);
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d) m(t, d) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("jacobian product basics") {
  CHECK((jacobian_product({}, 3) - Mat::Identity(3, 3)).norm() == 0.0);

  Vec a(3), b(3);
  a << 1.0, 2.0, 3.0;
  b << -1.0, 0.5, 2.0;
  std::vector<Mat> diags = {Mat(a.asDiagonal()), Mat(b.asDiagonal())};
  const Mat prod = jacobian_product(diags);
  CHECK((prod - Mat(Vec(a.cwiseProduct(b)).asDiagonal())).norm() == 0.0);

  Rng rng(1);
  std::vector<Mat> factors;
  for (int k = 0; k < 5; ++k) factors.push_back(random_mat(4, rng));
  const Mat expect = oracle::naive_fold(factors, 4);
  CHECK((jacobian_product(factors) - expect).cwiseAbs().maxCoeff() < 1e-12);

  std::vector<Mat> bad = {Mat::Identity(3, 3), Mat::Identity(4, 4)};
  CHECK_THROWS_AS(jacobian_product(bad), contract_error);
}

TEST_CASE("first order transport degenerate cases") {
  Rng rng(2);
  std::vector<Mat> retention, mixing;
  for (int k = 0; k < 4; ++k) {
    retention.push_back(random_mat(3, rng));
    mixing.push_back(Mat::Zero(3, 3));
  }
  const Mat exact = jacobian_product(retention);
  CHECK((first_order_transport(retention, mixing) - exact).cwiseAbs().maxCoeff() <
        1e-12);

  const Mat t = random_mat(3, rng), r = random_mat(3, rng);
  std::vector<Mat> t1 = {t}, r1 = {r};
  CHECK((first_order_transport(t1, r1) - (t + r)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("first order error shrinks quadratically") {
  Rng rng(3);
  int in_band = 0;
  const int trials = 25;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<Mat> retention, base_mixing;
    for (int k = 0; k < 6; ++k) {
      Vec d(4);
      for (int q = 0; q < 4; ++q) d(q) = rng.uniform_open();
      retention.push_back(Mat(d.asDiagonal()));
      base_mixing.push_back(random_mat(4, rng));
    }
    auto error_at = [&](double eps) {
      std::vector<Mat> jacobians, mixing;
      for (int k = 0; k < 6; ++k) {
        mixing.push_back(eps * base_mixing[k]);
        jacobians.push_back(retention[k] + mixing[k]);
      }
      const Mat exact = jacobian_product(jacobians);
      const Mat approx = first_order_transport(retention, mixing);
      return (exact - approx).norm();
    };
    const double ratio = error_at(1e-2) / error_at(5e-3);
    if (ratio >= 3.5 && ratio <= 4.5) ++in_band;
  }
  CHECK(in_band == trials);
}

TEST_CASE("const gate closed-form rates") {
  const CellKind kind = make_kind("const", 0.5);
  const CellParams p = init_params(kind, 3, 4, 11);
  Rng rng(7);
  const Trajectory traj = run_sequence(kind, p, random_inputs(12, 3, rng));
  const std::vector<int> grid = {1, 2, 3};
  const auto anchors = default_anchors(12, 3);
  const EffRateTensor tensor = effective_rates(
      kind, p, traj.caches, grid, anchors, 1.0, RateOrder::ZerothOnly);
  for (int q = 0; q < 4; ++q)
    CHECK(tensor.values(2, q) == doctest::Approx(0.125).epsilon(1e-12));
  // Envelope closed form at H neurons.
  const EnvelopeCurve curve = envelope(tensor);
  for (std::size_t k = 0; k < grid.size(); ++k)
    CHECK(curve.f_values[k] ==
          doctest::Approx(4.0 * std::pow(0.5, grid[k])).epsilon(1e-12));
}

TEST_CASE("gru zeroth envelopes with pinned gates") {
  const CellKind kind = make_kind("gru");
  CellParams p = init_params(kind, 2, 3, 5);
  for_each_tensor(p, [](const char*, double* d, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) d[k] = 0.0;
  });
  // z = sigmoid(0) = 1/2 and r = sigmoid(500) = 1 in double precision.
  p.b_r.setConstant(500.0);
  Rng rng(8);
  const Trajectory traj = run_sequence(kind, p, random_inputs(8, 2, rng));
  const std::vector<int> grid = {2};
  const auto anchors = default_anchors(8, 2);
  const EffRateTensor tensor = effective_rates(
      kind, p, traj.caches, grid, anchors, 1.0, RateOrder::ZerothOnly);
  // gamma = 0.25, rho = 1, eta = 0.25 at lag 2.
  for (int q = 0; q < 3; ++q)
    CHECK(tensor.values(0, q) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("lstm zeroth order follows the single retention path") {
  const CellKind kind = make_kind("lstm");
  const CellParams p = init_params(kind, 3, 4, 17);
  Rng rng(18);
  const Trajectory traj = run_sequence(kind, p, random_inputs(10, 3, rng));
  const std::vector<int> grid = {1, 2, 3, 4};
  const auto anchors = default_anchors(10, 4);
  const EffRateTensor tensor = effective_rates(
      kind, p, traj.caches, grid, anchors, 1.0, RateOrder::ZerothOnly);
  Mat expect = Mat::Zero(4, 4);
  for (int t : anchors) {
    const StepCache& at = traj.caches[static_cast<std::size_t>(t - 1)];
    const Vec e = (at.o.array() * (1.0 - at.tanh_c.array().square())).matrix();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      Vec prod = e;
      for (int j = t - grid[k] + 1; j <= t; ++j)
        prod = (prod.array() *
                traj.caches[static_cast<std::size_t>(j - 1)].f.array()).matrix();
      expect.row(static_cast<Eigen::Index>(k)) += prod.transpose();
    }
  }
  expect /= static_cast<double>(anchors.size());
  CHECK((tensor.values - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("first-order rates equal the explicit expansion diagonal") {
  Rng rng(29);
  for (const char* name : {"const", "shared", "diag", "gru", "lstm"}) {
    const CellKind kind = make_kind(name, 0.4);
    const CellParams p = init_params(kind, 3, 4, rng.next_u64());
    const int T = 9;
    const Trajectory traj = run_sequence(kind, p, random_inputs(T, 3, rng));
    const std::vector<int> grid = {1, 2, 3, 4, 5};
    const std::vector<int> anchors = {7, 9};
    const EffRateTensor tensor = effective_rates(
        kind, p, traj.caches, grid, anchors, 1.0, RateOrder::ZerothPlusFirst);

    const int H = 4;
    Mat expect = Mat::Zero(5, H);
    for (int t : anchors) {
      for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<Mat> retention, mixing;
        for (int j = t - grid[k] + 1; j <= t; ++j) {
          const StepCache& cache = traj.caches[static_cast<std::size_t>(j - 1)];
          const Mat jac = one_step_jacobian(kind, p, cache);
          Mat tpart, rpart;
          split_jacobian(kind, cache, jac, tpart, rpart);
          retention.push_back(tpart);
          mixing.push_back(rpart);
        }
        const Mat fot = first_order_transport(retention, mixing);
        const Mat block = kind.tag == CellTag::LSTM
                              ? Mat(fot.topRightCorner(H, H))
                              : fot;
        expect.row(static_cast<Eigen::Index>(k)) +=
            block.diagonal().transpose();
      }
    }
    expect /= 2.0;
    if (kind.tag == CellTag::GRU) {
      // The tensor additionally reports the reset-path envelopes.
      const EffRateTensor zeroth = effective_rates(
          kind, p, traj.caches, grid, anchors, 1.0, RateOrder::ZerothOnly);
      Mat gamma_only = Mat::Zero(5, H);
      for (int t : anchors) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
          Vec prod = Vec::Ones(H);
          for (int j = t - grid[k] + 1; j <= t; ++j)
            prod = (prod.array() *
                    (1.0 - traj.caches[static_cast<std::size_t>(j - 1)]
                               .gate.array())).matrix();
          gamma_only.row(static_cast<Eigen::Index>(k)) += prod.transpose();
        }
      }
      gamma_only /= 2.0;
      expect += zeroth.values - gamma_only;  // add rho + eta
    }
    CHECK_MESSAGE((tensor.values - expect).cwiseAbs().maxCoeff() < 1e-12, name);
  }
}

TEST_CASE("lstm first-order term is the derivative of the exact transport") {
  Rng rng(41);
  const CellKind kind = make_kind("lstm");
  const CellParams p = init_params(kind, 2, 3, 101);
  const int T = 7;
  const Trajectory traj = run_sequence(kind, p, random_inputs(T, 2, rng));
  const std::vector<int> grid = {2, 3, 4};
  const std::vector<int> anchors = {T};
  const EffRateTensor zeroth = effective_rates(
      kind, p, traj.caches, grid, anchors, 1.0, RateOrder::ZerothOnly);
  const EffRateTensor full = effective_rates(
      kind, p, traj.caches, grid, anchors, 1.0, RateOrder::ZerothPlusFirst);
  const Mat gamma1 = full.values - zeroth.values;

  const int H = 3;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const int lag = grid[k];
    auto exact_diag = [&](double eps) {
      std::vector<Mat> jacobians;
      for (int j = T - grid[k] + 1; j <= T; ++j) {
        const StepCache& cache = traj.caches[static_cast<std::size_t>(j - 1)];
        Mat tpart, rpart;
        split_jacobian(kind, cache, one_step_jacobian(kind, p, cache), tpart,
                       rpart);
        jacobians.push_back(tpart + eps * rpart);
      }
      return Vec(jacobian_product(jacobians).topRightCorner(H, H).diagonal());
    };
    auto discrepancy = [&](double eps) {
      const Vec predicted =
          zeroth.values.row(static_cast<Eigen::Index>(k)).transpose() +
          eps * gamma1.row(static_cast<Eigen::Index>(k)).transpose();
      return (exact_diag(eps) - predicted).norm();
    };
    if (lag == 2) {
      // Two factors leave no room for a second mixing insertion in the
      // cell-to-hidden block, so the expansion is exact there.
      CHECK(discrepancy(0.05) < 1e-12);
    } else {
      const double ratio = discrepancy(0.05) / discrepancy(0.025);
      CHECK(ratio > 3.5);
      CHECK(ratio < 4.5);
    }
  }
}

TEST_CASE("zeroth-order envelope never grows with the lag") {
  Rng rng(55);
  for (const char* name : {"const", "shared", "diag", "gru", "lstm"}) {
    const CellKind kind = make_kind(name, 0.6);
    for (int trial = 0; trial < 40; ++trial) {
      const CellParams p = init_params(kind, 2, 3, rng.next_u64());
      const Trajectory traj = run_sequence(kind, p, random_inputs(9, 2, rng));
      std::vector<int> grid = {1, 2, 3, 4, 5, 6, 7, 8};
      const auto anchors = default_anchors(9, 8);
      const EnvelopeCurve curve = envelope(effective_rates(
          kind, p, traj.caches, grid, anchors, 0.7, RateOrder::ZerothOnly));
      for (std::size_t k = 1; k < curve.f_values.size(); ++k)
        CHECK(curve.f_values[k] <= curve.f_values[k - 1] + 1e-15);
    }
  }
}

TEST_CASE("envelope aggregation") {
  EffRateTensor tensor;
  tensor.lag_grid = {1, 2, 3};
  tensor.values = Mat::Constant(3, 128, 0.1);
  tensor.order = RateOrder::ZerothOnly;
  const EnvelopeCurve curve = envelope(tensor);
  for (double f : curve.f_values) CHECK(f == doctest::Approx(12.8));

  EffRateTensor flipped = tensor;
  flipped.values = -tensor.values;
  const EnvelopeCurve same = envelope(flipped);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(same.f_values[k] == curve.f_values[k]);
}

TEST_CASE("lag grid rounding deduplicates") {
  const auto grid = integer_lag_grid(4.0, 256.0, 128);
  CHECK(grid.front() == 4);
  CHECK(grid.back() == 256);
  for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid[k] > grid[k - 1]);
  const auto tiny = integer_lag_grid(1.0, 4.0, 128);
  CHECK(tiny == std::vector<int>({1, 2, 3, 4}));
}
