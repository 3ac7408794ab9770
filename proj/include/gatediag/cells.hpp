#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gatediag/common.hpp"

namespace gatediag {

enum class CellTag { ConstGate, SharedGate, DiagGate, GRU, LSTM };

struct CellKind {
  CellTag tag = CellTag::ConstGate;
  double const_gate_value = 0.5;  // only meaningful for ConstGate, in (0,1)
};

CellKind make_kind(std::string_view name, double const_gate_value = 0.5);
std::string kind_name(const CellKind& kind);  // const/shared/diag/gru/lstm
inline bool has_cell_state(const CellKind& kind) {
  return kind.tag == CellTag::LSTM;
}

// Weights for one cell. Only the members required by `kind` are sized;
// candidate-path tensors W_h/U_h/b_h are shared by the three diagonally
// gated families and reused as the candidate path of the GRU.
struct CellParams {
  CellKind kind;
  int input_dim = 0;
  int hidden_dim = 0;

  Mat W_h, U_h;
  Vec b_h;

  // DiagGate gate path.
  Mat W_s, U_s;
  Vec b_s;

  // SharedGate scalar gate.
  Vec w_s, u_s;
  double b_s_scalar = 0.0;

  // GRU update/reset gates.
  Mat W_z, U_z, W_r, U_r;
  Vec b_z, b_r;

  // LSTM input/forget/output gates and cell candidate.
  Mat W_i, U_i, W_f, U_f, W_o, U_o, W_g, U_g;
  Vec b_i, b_f, b_o, b_g;
};

struct CellState {
  Vec h;
  Vec c;  // sized only for LSTM
};

// Everything a step produces that the Jacobian, the backward pass, and the
// rate diagnostics need. Activation slopes are recovered from the stored
// activations (sigmoid' = s(1-s), tanh' = 1 - v^2).
struct StepCache {
  Vec x;
  Vec h_prev;
  Vec h_new;

  Vec cand;         // candidate activation (tanh), all kinds
  Vec gate;         // DiagGate s_t / GRU z_t / LSTM i_t
  double gate_scalar = 0.0;  // SharedGate s_t; ConstGate fixed s

  // GRU extras.
  Vec reset;
  Vec reset_h_prev;  // r_t .* h_{t-1}, the candidate-path input

  // LSTM extras.
  Vec c_prev, f, o, c_new, tanh_c;
};

CellState zero_state(const CellKind& kind, int hidden_dim);

// Orthogonal recurrence matrices (QR of a Gaussian draw, sign-fixed),
// Gaussian input matrices scaled 1/sqrt(D), zero biases. The SharedGate
// gate vectors are Gaussian scaled 1/sqrt(D) resp. 1/sqrt(H). Deterministic
// per seed.
CellParams init_params(const CellKind& kind, int input_dim, int hidden_dim,
                       std::uint64_t seed);

CellState step(const CellKind& kind, const CellParams& params, const Vec& x,
               const CellState& state, StepCache& cache);

// Exact one-step Jacobian of the state map at the cached step: H x H, or
// 2H x 2H in [h; c] block order for LSTM.
Mat one_step_jacobian(const CellKind& kind, const CellParams& params,
                      const StepCache& cache);

struct Trajectory {
  std::vector<CellState> states;   // states[t] after step t, t = 0..T-1
  std::vector<StepCache> caches;
};

Trajectory run_sequence(const CellKind& kind, const CellParams& params,
                        const Mat& inputs, const CellState& initial);
Trajectory run_sequence(const CellKind& kind, const CellParams& params,
                        const Mat& inputs);

// Visits every parameter tensor of `kind` in its canonical (serialization,
// initialization, flattening) order. Vec/Mat are visited through spans of
// their storage; the SharedGate scalar bias is visited as a length-1 span.
void for_each_tensor(CellParams& params,
                     const std::function<void(const char*, double*, std::size_t)>& fn);
void for_each_tensor(const CellParams& params,
                     const std::function<void(const char*, const double*, std::size_t)>& fn);

// Allocates a zero-filled parameter record with the same shapes.
CellParams zeros_like(const CellParams& params);

// Total number of scalar parameters in the cell.
std::size_t cell_param_count(const CellParams& params);

}  // namespace gatediag
