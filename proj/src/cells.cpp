#include "gatediag/cells.hpp"

#include <cmath>

#include "gatediag/rng.hpp"

namespace gatediag {

namespace {

Vec sigmoid(const Vec& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

Mat gaussian_matrix(int rows, int cols, double scale, Rng& rng) {
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

Vec gaussian_vector(int dim, double scale, Rng& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = scale * rng.normal();
  return v;
}

// QR of a Gaussian square matrix, sign-fixed so the triangular factor has a
// positive diagonal; the resulting Q is Haar-distributed.
Mat orthogonal_matrix(int dim, Rng& rng) {
  const Mat g = gaussian_matrix(dim, dim, 1.0, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

void check_dims(const CellParams& params, const Vec& x, const CellState& state) {
  if (x.size() != params.input_dim)
    throw contract_error("step: input dimension mismatch");
  if (state.h.size() != params.hidden_dim)
    throw contract_error("step: hidden state dimension mismatch");
  if (has_cell_state(params.kind) && state.c.size() != params.hidden_dim)
    throw contract_error("step: missing cell state");
}

}  // namespace

CellKind make_kind(std::string_view name, double const_gate_value) {
  CellKind kind;
  if (name == "const")
    kind.tag = CellTag::ConstGate;
  else if (name == "shared")
    kind.tag = CellTag::SharedGate;
  else if (name == "diag")
    kind.tag = CellTag::DiagGate;
  else if (name == "gru")
    kind.tag = CellTag::GRU;
  else if (name == "lstm")
    kind.tag = CellTag::LSTM;
  else
    throw config_error("unknown cell kind: " + std::string(name));
  if (!(const_gate_value > 0.0 && const_gate_value < 1.0))
    throw config_error("const gate value must lie in (0, 1)");
  kind.const_gate_value = const_gate_value;
  return kind;
}

std::string kind_name(const CellKind& kind) {
  switch (kind.tag) {
    case CellTag::ConstGate: return "const";
    case CellTag::SharedGate: return "shared";
    case CellTag::DiagGate: return "diag";
    case CellTag::GRU: return "gru";
    case CellTag::LSTM: return "lstm";
  }
  return "?";
}

CellState zero_state(const CellKind& kind, int hidden_dim) {
  CellState state;
  state.h = Vec::Zero(hidden_dim);
  if (has_cell_state(kind)) state.c = Vec::Zero(hidden_dim);
  return state;
}

CellParams init_params(const CellKind& kind, int input_dim, int hidden_dim,
                       std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1)
    throw contract_error("init_params: dimensions must be >= 1");
  Rng rng(derive_seed(seed, "cell-init"));
  CellParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));

  auto input_mat = [&] { return gaussian_matrix(hidden_dim, input_dim, in_scale, rng); };
  auto rec_mat = [&] { return orthogonal_matrix(hidden_dim, rng); };
  auto zero_bias = [&] { return Vec::Zero(hidden_dim); };

  switch (kind.tag) {
    case CellTag::ConstGate:
      p.W_h = input_mat(); p.U_h = rec_mat(); p.b_h = zero_bias();
      break;
    case CellTag::SharedGate:
      p.W_h = input_mat(); p.U_h = rec_mat(); p.b_h = zero_bias();
      p.w_s = gaussian_vector(input_dim, in_scale, rng);
      p.u_s = gaussian_vector(hidden_dim,
                              1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
      p.b_s_scalar = 0.0;
      break;
    case CellTag::DiagGate:
      p.W_h = input_mat(); p.U_h = rec_mat(); p.b_h = zero_bias();
      p.W_s = input_mat(); p.U_s = rec_mat(); p.b_s = zero_bias();
      break;
    case CellTag::GRU:
      p.W_z = input_mat(); p.U_z = rec_mat(); p.b_z = zero_bias();
      p.W_r = input_mat(); p.U_r = rec_mat(); p.b_r = zero_bias();
      p.W_h = input_mat(); p.U_h = rec_mat(); p.b_h = zero_bias();
      break;
    case CellTag::LSTM:
      p.W_i = input_mat(); p.U_i = rec_mat(); p.b_i = zero_bias();
      p.W_f = input_mat(); p.U_f = rec_mat(); p.b_f = zero_bias();
      p.W_o = input_mat(); p.U_o = rec_mat(); p.b_o = zero_bias();
      p.W_g = input_mat(); p.U_g = rec_mat(); p.b_g = zero_bias();
      break;
  }
  return p;
}

CellState step(const CellKind& kind, const CellParams& params, const Vec& x,
               const CellState& state, StepCache& cache) {
  check_dims(params, x, state);
  cache = StepCache{};
  cache.x = x;
  cache.h_prev = state.h;

  CellState next;
  switch (kind.tag) {
    case CellTag::ConstGate: {
      const double s = kind.const_gate_value;
      cache.gate_scalar = s;
      cache.cand = (params.W_h * x + params.U_h * state.h + params.b_h)
                       .array().tanh().matrix();
      next.h = (1.0 - s) * state.h + s * cache.cand;
      break;
    }
    case CellTag::SharedGate: {
      const double a_s =
          params.w_s.dot(x) + params.u_s.dot(state.h) + params.b_s_scalar;
      const double s = sigmoid(a_s);
      cache.gate_scalar = s;
      cache.cand = (params.W_h * x + params.U_h * state.h + params.b_h)
                       .array().tanh().matrix();
      next.h = (1.0 - s) * state.h + s * cache.cand;
      break;
    }
    case CellTag::DiagGate: {
      cache.gate = sigmoid(params.W_s * x + params.U_s * state.h + params.b_s);
      cache.cand = (params.W_h * x + params.U_h * state.h + params.b_h)
                       .array().tanh().matrix();
      next.h = ((Vec::Ones(params.hidden_dim) - cache.gate).array() *
                    state.h.array() +
                cache.gate.array() * cache.cand.array()).matrix();
      break;
    }
    case CellTag::GRU: {
      cache.gate = sigmoid(params.W_z * x + params.U_z * state.h + params.b_z);
      cache.reset = sigmoid(params.W_r * x + params.U_r * state.h + params.b_r);
      cache.reset_h_prev = (cache.reset.array() * state.h.array()).matrix();
      cache.cand = (params.W_h * x + params.U_h * cache.reset_h_prev + params.b_h)
                       .array().tanh().matrix();
      next.h = ((Vec::Ones(params.hidden_dim) - cache.gate).array() *
                    state.h.array() +
                cache.gate.array() * cache.cand.array()).matrix();
      break;
    }
    case CellTag::LSTM: {
      cache.c_prev = state.c;
      cache.gate = sigmoid(params.W_i * x + params.U_i * state.h + params.b_i);
      cache.f = sigmoid(params.W_f * x + params.U_f * state.h + params.b_f);
      cache.o = sigmoid(params.W_o * x + params.U_o * state.h + params.b_o);
      cache.cand = (params.W_g * x + params.U_g * state.h + params.b_g)
                       .array().tanh().matrix();
      cache.c_new = (cache.f.array() * state.c.array() +
                     cache.gate.array() * cache.cand.array()).matrix();
      cache.tanh_c = cache.c_new.array().tanh().matrix();
      next.c = cache.c_new;
      next.h = (cache.o.array() * cache.tanh_c.array()).matrix();
      break;
    }
  }
  cache.h_new = next.h;
  return next;
}

Mat one_step_jacobian(const CellKind& kind, const CellParams& params,
                      const StepCache& cache) {
  const int H = params.hidden_dim;
  if (cache.h_prev.size() != H)
    throw contract_error("one_step_jacobian: cache does not match params");

  switch (kind.tag) {
    case CellTag::ConstGate: {
      const double s = cache.gate_scalar;
      const Vec slope = (1.0 - cache.cand.array().square()).matrix();
      Mat j = s * (slope.asDiagonal() * params.U_h);
      j.diagonal().array() += 1.0 - s;
      return j;
    }
    case CellTag::SharedGate: {
      const double s = cache.gate_scalar;
      const Vec slope = (1.0 - cache.cand.array().square()).matrix();
      Mat j = s * (slope.asDiagonal() * params.U_h);
      j += (s * (1.0 - s)) * (cache.cand - cache.h_prev) * params.u_s.transpose();
      j.diagonal().array() += 1.0 - s;
      return j;
    }
    case CellTag::DiagGate: {
      const Vec& s = cache.gate;
      const Vec gate_slope =
          ((cache.cand - cache.h_prev).array() * s.array() * (1.0 - s.array()))
              .matrix();
      const Vec cand_slope =
          (s.array() * (1.0 - cache.cand.array().square())).matrix();
      Mat j = gate_slope.asDiagonal() * params.U_s;
      j += cand_slope.asDiagonal() * params.U_h;
      j.diagonal() += (1.0 - s.array()).matrix();
      return j;
    }
    case CellTag::GRU: {
      const Vec& z = cache.gate;
      const Vec update_slope =
          ((cache.cand - cache.h_prev).array() * z.array() * (1.0 - z.array()))
              .matrix();
      const Vec cand_slope =
          (z.array() * (1.0 - cache.cand.array().square())).matrix();
      const Vec reset_slope = (cache.h_prev.array() * cache.reset.array() *
                               (1.0 - cache.reset.array())).matrix();
      Mat j = update_slope.asDiagonal() * params.U_z;
      const Mat cand_path = cand_slope.asDiagonal() * params.U_h;
      j += cand_path * cache.reset.asDiagonal();
      j += cand_path * (reset_slope.asDiagonal() * params.U_r);
      j.diagonal() += (1.0 - z.array()).matrix();
      return j;
    }
    case CellTag::LSTM: {
      const Vec& i = cache.gate;
      const Vec& f = cache.f;
      const Vec& o = cache.o;
      const Vec& g = cache.cand;
      const Vec e = (o.array() * (1.0 - cache.tanh_c.array().square())).matrix();

      Mat c_h = (cache.c_prev.array() * f.array() * (1.0 - f.array()))
                    .matrix().asDiagonal() * params.U_f;
      c_h += (i.array() * (1.0 - g.array().square())).matrix().asDiagonal() *
             params.U_g;
      c_h += (g.array() * i.array() * (1.0 - i.array())).matrix().asDiagonal() *
             params.U_i;

      Mat j = Mat::Zero(2 * H, 2 * H);
      // h_t rows.
      j.topLeftCorner(H, H) =
          (cache.tanh_c.array() * o.array() * (1.0 - o.array()))
              .matrix().asDiagonal() * params.U_o;
      j.topLeftCorner(H, H) += e.asDiagonal() * c_h;
      j.topRightCorner(H, H) =
          Mat((e.array() * f.array()).matrix().asDiagonal());
      // c_t rows.
      j.bottomLeftCorner(H, H) = c_h;
      j.bottomRightCorner(H, H) = Mat(f.asDiagonal());
      return j;
    }
  }
  throw contract_error("one_step_jacobian: unknown kind");
}

Trajectory run_sequence(const CellKind& kind, const CellParams& params,
                        const Mat& inputs, const CellState& initial) {
  const auto T = inputs.rows();
  if (T < 1) throw contract_error("run_sequence: need at least one step");
  if (inputs.cols() != params.input_dim)
    throw contract_error("run_sequence: input dimension mismatch");

  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(T));
  traj.caches.resize(static_cast<std::size_t>(T));
  CellState state = initial;
  for (Eigen::Index t = 0; t < T; ++t) {
    state = step(kind, params, inputs.row(t).transpose(), state,
                 traj.caches[static_cast<std::size_t>(t)]);
    traj.states.push_back(state);
  }
  return traj;
}

Trajectory run_sequence(const CellKind& kind, const CellParams& params,
                        const Mat& inputs) {
  return run_sequence(kind, params, inputs, zero_state(kind, params.hidden_dim));
}

namespace {

template <typename Params, typename Fn>
void visit_tensors(Params& p, const Fn& fn) {
  auto mat = [&](const char* name, auto& m) { fn(name, m.data(), static_cast<std::size_t>(m.size())); };
  switch (p.kind.tag) {
    case CellTag::ConstGate:
      mat("W_h", p.W_h); mat("U_h", p.U_h); mat("b_h", p.b_h);
      break;
    case CellTag::SharedGate:
      mat("W_h", p.W_h); mat("U_h", p.U_h); mat("b_h", p.b_h);
      mat("w_s", p.w_s); mat("u_s", p.u_s);
      fn("b_s", &p.b_s_scalar, 1);
      break;
    case CellTag::DiagGate:
      mat("W_h", p.W_h); mat("U_h", p.U_h); mat("b_h", p.b_h);
      mat("W_s", p.W_s); mat("U_s", p.U_s); mat("b_s", p.b_s);
      break;
    case CellTag::GRU:
      mat("W_z", p.W_z); mat("U_z", p.U_z); mat("b_z", p.b_z);
      mat("W_r", p.W_r); mat("U_r", p.U_r); mat("b_r", p.b_r);
      mat("W_h", p.W_h); mat("U_h", p.U_h); mat("b_h", p.b_h);
      break;
    case CellTag::LSTM:
      mat("W_i", p.W_i); mat("U_i", p.U_i); mat("b_i", p.b_i);
      mat("W_f", p.W_f); mat("U_f", p.U_f); mat("b_f", p.b_f);
      mat("W_o", p.W_o); mat("U_o", p.U_o); mat("b_o", p.b_o);
      mat("W_g", p.W_g); mat("U_g", p.U_g); mat("b_g", p.b_g);
      break;
  }
}

}  // namespace

void for_each_tensor(CellParams& params,
                     const std::function<void(const char*, double*, std::size_t)>& fn) {
  visit_tensors(params, fn);
}

void for_each_tensor(const CellParams& params,
                     const std::function<void(const char*, const double*, std::size_t)>& fn) {
  visit_tensors(params, fn);
}

CellParams zeros_like(const CellParams& params) {
  CellParams z = params;
  for_each_tensor(z, [](const char*, double* data, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) data[k] = 0.0;
  });
  return z;
}

std::size_t cell_param_count(const CellParams& params) {
  std::size_t total = 0;
  for_each_tensor(params, [&](const char*, const double*, std::size_t n) { total += n; });
  return total;
}

}  // namespace gatediag
