#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gatediag/cells.hpp"
#include "gatediag/rng.hpp"
#include "oracles.hpp"

using namespace gatediag;

namespace {

const char* kAllKinds[] = {"const", "shared", "diag", "gru", "lstm"};

CellState random_state(const CellKind& kind, int H, Rng& rng, double scale = 1.0) {
  CellState s = zero_state(kind, H);
  for (int q = 0; q < H; ++q) s.h(q) = scale * rng.normal();
  if (has_cell_state(kind))
    for (int q = 0; q < H; ++q) s.c(q) = scale * rng.normal();
  return s;
}

Vec random_vec(int n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("orthogonal recurrence matrices") {
  const CellKind kind = make_kind("gru");
  const CellParams p = init_params(kind, 3, 8, 42);
  for (const Mat* u : {&p.U_z, &p.U_r, &p.U_h}) {
    const Mat gram = u->transpose() * (*u);
    CHECK((gram - Mat::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("zero input and state give the centered gate") {
  const CellKind kind = make_kind("diag");
  const CellParams p = init_params(kind, 4, 6, 7);
  StepCache cache;
  step(kind, p, Vec::Zero(4), zero_state(kind, 6), cache);
  for (int q = 0; q < 6; ++q) CHECK(cache.gate(q) == doctest::Approx(0.5));
}

TEST_CASE("initialization is deterministic per seed") {
  for (const char* name : kAllKinds) {
    const CellKind kind = make_kind(name);
    const CellParams a = init_params(kind, 5, 4, 123);
    const CellParams b = init_params(kind, 5, 4, 123);
    bool equal = true;
    std::vector<std::pair<const double*, std::size_t>> ta, tb;
    for_each_tensor(a, [&](const char*, const double* d, std::size_t n) { ta.push_back({d, n}); });
    for_each_tensor(b, [&](const char*, const double* d, std::size_t n) { tb.push_back({d, n}); });
    for (std::size_t s = 0; s < ta.size(); ++s)
      for (std::size_t k = 0; k < ta[s].second; ++k)
        equal = equal && ta[s].first[k] == tb[s].first[k];
    CHECK(equal);
  }
}

TEST_CASE("pure candidate and pure leak limits") {
  const int D = 3, H = 4;
  Rng rng(5);
  const Vec x = random_vec(D, rng);
  CellState state = zero_state(make_kind("const"), H);
  state.h = random_vec(H, rng);

  CellKind pass = make_kind("const", 0.999999999999);
  CellParams p = init_params(pass, D, H, 3);
  StepCache cache;
  const Vec direct =
      (p.W_h * x + p.U_h * state.h + p.b_h).array().tanh().matrix();
  {
    const CellState out = step(pass, p, x, state, cache);
    CHECK((out.h - direct).cwiseAbs().maxCoeff() < 1e-9);
  }
  {
    CellKind hold = make_kind("const", 1e-15);
    p.kind = hold;
    const CellState out = step(hold, p, x, state, cache);
    CHECK((out.h - state.h).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gru closed form at zero weights") {
  const CellKind kind = make_kind("gru");
  CellParams p = init_params(kind, 2, 2, 1);
  for_each_tensor(p, [](const char*, double* d, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) d[k] = 0.0;
  });
  CellState state = zero_state(kind, 2);
  state.h << 1.0, -2.0;
  StepCache cache;
  const CellState out = step(kind, p, Vec::Zero(2), state, cache);
  CHECK(cache.gate(0) == doctest::Approx(0.5));  // z
  CHECK(cache.cand.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(out.h(0) == doctest::Approx(0.5));
  CHECK(out.h(1) == doctest::Approx(-1.0));
}

TEST_CASE("const gate jacobian with no recurrence") {
  const CellKind kind = make_kind("const", 0.25);
  CellParams p = init_params(kind, 3, 2, 9);
  p.U_h.setZero();
  StepCache cache;
  Rng rng(17);
  CellState state = random_state(kind, 2, rng);
  step(kind, p, random_vec(3, rng), state, cache);
  const Mat j = one_step_jacobian(kind, p, cache);
  CHECK((j - 0.75 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("analytic jacobians match finite differences") {
  const int D = 3, H = 4;
  Rng rng(2024);
  for (const char* name : kAllKinds) {
    const CellKind kind = make_kind(name, 0.35);
    for (int trial = 0; trial < 12; ++trial) {
      const CellParams p = init_params(kind, D, H, rng.next_u64());
      const Vec x = random_vec(D, rng);
      const CellState state = random_state(kind, H, rng);
      StepCache cache;
      step(kind, p, x, state, cache);
      const Mat analytic = one_step_jacobian(kind, p, cache);
      const Mat fd = oracle::fd_jacobian(kind, p, x, state);
      const double denom = std::max(1.0, fd.cwiseAbs().maxCoeff());
      const double err = (analytic - fd).cwiseAbs().maxCoeff() / denom;
      CHECK_MESSAGE(err < 1e-5, name, " trial ", trial, " err=", err);
    }
  }
}

TEST_CASE("shared gate mixing is rank one beyond the candidate path") {
  const CellKind kind = make_kind("shared");
  const int H = 5;
  Rng rng(31);
  const CellParams p = init_params(kind, 3, H, 77);
  const Vec x = random_vec(3, rng);
  const CellState state = random_state(kind, H, rng);
  StepCache cache;
  step(kind, p, x, state, cache);
  const Mat j = one_step_jacobian(kind, p, cache);
  const double s = cache.gate_scalar;
  const Vec slope = (1.0 - cache.cand.array().square()).matrix();
  Mat residual = j - s * (slope.asDiagonal() * p.U_h);
  residual.diagonal().array() -= 1.0 - s;
  Eigen::JacobiSVD<Mat> svd(residual);
  CHECK(svd.singularValues()(1) < 1e-12 * svd.singularValues()(0));
}

TEST_CASE("lstm cell-to-cell block is the forget diagonal") {
  const CellKind kind = make_kind("lstm");
  const int H = 4;
  Rng rng(88);
  const CellParams p = init_params(kind, 3, H, 19);
  const CellState state = random_state(kind, H, rng);
  StepCache cache;
  step(kind, p, random_vec(3, rng), state, cache);
  const Mat j = one_step_jacobian(kind, p, cache);
  const Mat block = j.bottomRightCorner(H, H);
  CHECK((block - Mat(cache.f.asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gates stay in range on wild inputs") {
  Rng rng(3);
  for (const char* name : kAllKinds) {
    const CellKind kind = make_kind(name);
    const CellParams p = init_params(kind, 4, 6, 55);
    CellState state = zero_state(kind, 6);
    for (int t = 0; t < 50; ++t) {
      const Vec x = 10.0 * random_vec(4, rng).cwiseMax(-1.0).cwiseMin(1.0);
      StepCache cache;
      state = step(kind, p, x, state, cache);
      if (cache.gate.size())
        for (int q = 0; q < 6; ++q) {
          CHECK(cache.gate(q) > 0.0);
          CHECK(cache.gate(q) < 1.0);
        }
      // tanh saturates to +-1.0 in double precision near |a| ~ 19, so the
      // open mathematical range is checked as the closed one here.
      for (int q = 0; q < 6; ++q) CHECK(std::abs(cache.cand(q)) <= 1.0);
    }
  }
}

TEST_CASE("run_sequence basics") {
  const CellKind kind = make_kind("gru");
  const CellParams p = init_params(kind, 3, 4, 12);
  Rng rng(9);
  Mat inputs(1, 3);
  inputs << rng.normal(), rng.normal(), rng.normal();
  const Trajectory one = run_sequence(kind, p, inputs);
  StepCache cache;
  const CellState direct =
      step(kind, p, inputs.row(0).transpose(), zero_state(kind, 4), cache);
  CHECK((one.states[0].h - direct.h).cwiseAbs().maxCoeff() == 0.0);

  // Frozen gate holds the initial state.
  const CellKind hold = make_kind("const", 1e-15);
  const CellParams ph = init_params(hold, 3, 4, 12);
  Mat many(6, 3);
  for (int t = 0; t < 6; ++t)
    for (int d = 0; d < 3; ++d) many(t, d) = rng.normal();
  CellState init = zero_state(hold, 4);
  init.h = random_vec(4, rng);
  const Trajectory frozen = run_sequence(hold, ph, many, init);
  for (const CellState& s : frozen.states)
    CHECK((s.h - init.h).cwiseAbs().maxCoeff() < 1e-12);

  // Replay from cached states is bitwise identical.
  const CellKind kind2 = make_kind("lstm");
  const CellParams p2 = init_params(kind2, 3, 4, 21);
  const Trajectory a = run_sequence(kind2, p2, many);
  const Trajectory b = run_sequence(kind2, p2, many);
  for (std::size_t t = 0; t < a.states.size(); ++t) {
    CHECK(a.states[t].h == b.states[t].h);
    CHECK(a.states[t].c == b.states[t].c);
  }
}
