#include "gatediag/transport.hpp"

#include <cmath>

namespace gatediag {

RateOrder parse_order(std::string_view name) {
  if (name == "zeroth_only") return RateOrder::ZerothOnly;
  if (name == "zeroth_plus_first") return RateOrder::ZerothPlusFirst;
  throw config_error("unknown rate order: " + std::string(name));
}

std::string order_name(RateOrder order) {
  return order == RateOrder::ZerothOnly ? "zeroth_only" : "zeroth_plus_first";
}

Mat jacobian_product(std::span<const Mat> jacobians, int dim_if_empty) {
  if (jacobians.empty()) {
    if (dim_if_empty < 1)
      throw contract_error("jacobian_product: empty list needs a dimension");
    return Mat::Identity(dim_if_empty, dim_if_empty);
  }
  const auto dim = jacobians.front().rows();
  Mat result = Mat::Identity(dim, dim);
  for (const Mat& j : jacobians) {
    if (j.rows() != dim || j.cols() != dim)
      throw contract_error("jacobian_product: size mismatch");
    result = j * result;  // later steps act on the left
  }
  return result;
}

Mat first_order_transport(std::span<const Mat> retention,
                          std::span<const Mat> mixing) {
  if (retention.size() != mixing.size())
    throw contract_error("first_order_transport: list length mismatch");
  if (retention.empty())
    throw contract_error("first_order_transport: empty factor list");
  const auto dim = retention.front().rows();
  const std::size_t n = retention.size();
  for (std::size_t k = 0; k < n; ++k)
    if (retention[k].rows() != dim || retention[k].cols() != dim ||
        mixing[k].rows() != dim || mixing[k].cols() != dim)
      throw contract_error("first_order_transport: size mismatch");

  // prefix[k] = T_k ... T_1 (chronological fold), suffix[k] = T_n ... T_{k+1}.
  std::vector<Mat> prefix(n + 1), suffix(n + 1);
  prefix[0] = Mat::Identity(dim, dim);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = retention[k] * prefix[k];
  suffix[n] = Mat::Identity(dim, dim);
  for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] * retention[k];

  Mat result = prefix[n];
  for (std::size_t p = 0; p < n; ++p)
    result += suffix[p + 1] * mixing[p] * prefix[p];
  return result;
}

std::vector<int> default_anchors(int seq_len, int max_lag, int stride) {
  if (stride < 1) throw contract_error("default_anchors: stride must be >= 1");
  std::vector<int> anchors;
  for (int t = max_lag + 1; t <= seq_len; t += stride) anchors.push_back(t);
  return anchors;
}

namespace {

// Retention diagonal (the gate-diagonal part of the one-step Jacobian) at a
// cached step.
Vec retention_diag(const CellKind& kind, const StepCache& cache) {
  switch (kind.tag) {
    case CellTag::ConstGate:
    case CellTag::SharedGate:
      return Vec::Constant(cache.h_prev.size(), 1.0 - cache.gate_scalar);
    case CellTag::DiagGate:
    case CellTag::GRU:
      return (1.0 - cache.gate.array()).matrix();
    case CellTag::LSTM:
      return cache.f;  // cell-path retention
  }
  throw contract_error("retention_diag: unknown kind");
}

// Diagonal of the recurrent mixing part of the one-step Jacobian. For LSTM
// this is the diagonal of the cell-row mixing block; the hidden-row mixing
// diagonal is returned separately by lstm_mixing_diags.
Vec mixing_diag(const CellKind& kind, const CellParams& params,
                const StepCache& cache) {
  switch (kind.tag) {
    case CellTag::ConstGate: {
      const double s = cache.gate_scalar;
      return (s * (1.0 - cache.cand.array().square()) *
              params.U_h.diagonal().array()).matrix();
    }
    case CellTag::SharedGate: {
      const double s = cache.gate_scalar;
      Vec d = (s * (1.0 - cache.cand.array().square()) *
               params.U_h.diagonal().array()).matrix();
      d += (s * (1.0 - s)) *
           ((cache.cand - cache.h_prev).array() * params.u_s.array()).matrix();
      return d;
    }
    case CellTag::DiagGate: {
      const Vec& s = cache.gate;
      Vec d = (s.array() * (1.0 - cache.cand.array().square()) *
               params.U_h.diagonal().array()).matrix();
      d += ((cache.cand - cache.h_prev).array() * s.array() *
            (1.0 - s.array()) * params.U_s.diagonal().array()).matrix();
      return d;
    }
    case CellTag::GRU: {
      const Vec& z = cache.gate;
      const Vec cand_slope =
          (z.array() * (1.0 - cache.cand.array().square())).matrix();
      Vec d = ((cache.cand - cache.h_prev).array() * z.array() *
               (1.0 - z.array()) * params.U_z.diagonal().array()).matrix();
      d += (cand_slope.array() * params.U_h.diagonal().array() *
            cache.reset.array()).matrix();
      // Reset-through-candidate chain: diag(U_h D S^r U_r).
      const Vec inner = (cache.h_prev.array() * cache.reset.array() *
                         (1.0 - cache.reset.array())).matrix();
      const int H = static_cast<int>(cache.h_prev.size());
      for (int q = 0; q < H; ++q) {
        double acc = 0.0;
        for (int k = 0; k < H; ++k)
          acc += params.U_h(q, k) * inner(k) * params.U_r(k, q);
        d(q) += cand_slope(q) * acc;
      }
      return d;
    }
    case CellTag::LSTM:
      break;
  }
  throw contract_error("mixing_diag: unsupported kind");
}

// LSTM mixing-block diagonals: diag of the cell-row block C and of the full
// hidden-row block A = H S^o U_o + E C.
void lstm_mixing_diags(const CellParams& params, const StepCache& cache,
                       Vec& diag_c, Vec& diag_a) {
  const Vec& i = cache.gate;
  diag_c = (cache.c_prev.array() * cache.f.array() * (1.0 - cache.f.array()) *
            params.U_f.diagonal().array()).matrix();
  diag_c += (i.array() * (1.0 - cache.cand.array().square()) *
             params.U_g.diagonal().array()).matrix();
  diag_c += (cache.cand.array() * i.array() * (1.0 - i.array()) *
             params.U_i.diagonal().array()).matrix();
  const Vec e =
      (cache.o.array() * (1.0 - cache.tanh_c.array().square())).matrix();
  diag_a = (cache.tanh_c.array() * cache.o.array() * (1.0 - cache.o.array()) *
            params.U_o.diagonal().array()).matrix();
  diag_a += (e.array() * diag_c.array()).matrix();
}

Vec expression_diag(const StepCache& cache) {
  return (cache.o.array() * (1.0 - cache.tanh_c.array().square())).matrix();
}

}  // namespace

RateWorkspace prepare_rate_workspace(const CellKind& kind,
                                     const CellParams& params,
                                     std::span<const StepCache> caches,
                                     RateOrder order) {
  RateWorkspace ws;
  const std::size_t T = caches.size();
  ws.retain.resize(T);
  if (order == RateOrder::ZerothPlusFirst) {
    ws.mix.resize(T);
    if (kind.tag == CellTag::LSTM) ws.mix_h.resize(T);
  }
  for (std::size_t j = 0; j < T; ++j) {
    ws.retain[j] = retention_diag(kind, caches[j]);
    if (order == RateOrder::ZerothPlusFirst) {
      if (kind.tag == CellTag::LSTM)
        lstm_mixing_diags(params, caches[j], ws.mix[j], ws.mix_h[j]);
      else
        ws.mix[j] = mixing_diag(kind, params, caches[j]);
    }
  }
  return ws;
}

namespace {

void check_rate_grid(const std::vector<int>& lag_grid) {
  if (lag_grid.empty()) throw contract_error("effective_rates: empty lag grid");
  for (std::size_t k = 0; k < lag_grid.size(); ++k)
    if (lag_grid[k] < 1 || (k > 0 && lag_grid[k] <= lag_grid[k - 1]))
      throw contract_error(
          "effective_rates: lag grid must be strictly increasing, >= 1");
}

}  // namespace

Mat per_anchor_rates(const CellKind& kind, std::span<const StepCache> caches,
                     const RateWorkspace& ws, const std::vector<int>& lag_grid,
                     int anchor_t, double mu, RateOrder order) {
  check_rate_grid(lag_grid);
  const int max_lag = lag_grid.back();
  const int T = static_cast<int>(caches.size());
  if (anchor_t < 1 || anchor_t > T || anchor_t - max_lag < 0)
    throw contract_error("effective_rates: lag exceeds available history at anchor");

  const int H = static_cast<int>(caches[0].h_prev.size());
  const bool first = order == RateOrder::ZerothPlusFirst;
  const bool lstm = kind.tag == CellTag::LSTM;
  const bool gru = kind.tag == CellTag::GRU;
  const int t = anchor_t;
  const auto at = [&](int step) -> const StepCache& {
    return caches[static_cast<std::size_t>(step - 1)];
  };

  Mat out(static_cast<Eigen::Index>(lag_grid.size()), H);
  Vec gamma0 = Vec::Ones(H), gamma1 = Vec::Zero(H);
  Vec rho0, eta0;
  if (gru) { rho0 = Vec::Ones(H); eta0 = Vec::Ones(H); }

  Vec e_t, e_prev, phi, phi_prev, rest, term_t;
  if (lstm) {
    e_t = expression_diag(at(t));
    phi = Vec::Ones(H);
    phi_prev = Vec::Ones(H);
    rest = Vec::Zero(H);
    term_t = Vec::Zero(H);
  }

  std::size_t grid_pos = 0;
  Vec rates(H);
  for (int lag = 1; lag <= max_lag; ++lag) {
    const int j = t - lag + 1;  // newly included step
    const Vec& r_j = ws.retain[static_cast<std::size_t>(j - 1)];
    if (!lstm) {
      if (first) {
        const Vec& m_j = ws.mix[static_cast<std::size_t>(j - 1)];
        gamma1 = (r_j.array() * gamma1.array() +
                  gamma0.array() * m_j.array()).matrix();
      }
      gamma0 = (gamma0.array() * r_j.array()).matrix();
      if (gru) {
        const Vec& reset_j = at(j).reset;
        eta0 = (eta0.array() * r_j.array() * reset_j.array()).matrix();
        rho0 = (rho0.array() * reset_j.array()).matrix();
      }
    } else {
      // Cell-path retention chain with expression at the ends; a single
      // mixing insertion re-enters through the full hidden-row block at
      // the anchor itself and through the cell-row block at interior
      // times. The lag-1 transport has no insertion slot.
      if (lag == 1) {
        phi = r_j;
      } else {
        if (first) {
          if (lag == 2) {
            term_t = (ws.mix_h[static_cast<std::size_t>(t - 1)].array() *
                      expression_diag(at(t - 1)).array() * r_j.array())
                         .matrix();
          } else {
            const Vec& c_next = ws.mix[static_cast<std::size_t>(j)];  // step j+1
            e_prev = expression_diag(at(j));
            rest = (r_j.array() *
                    (rest.array() + e_t.array() * phi_prev.array() *
                                        c_next.array() * e_prev.array()))
                       .matrix();
            term_t = (term_t.array() * r_j.array()).matrix();
          }
          gamma1 = term_t + rest;
        }
        phi_prev = phi;
        phi = (phi.array() * r_j.array()).matrix();
      }
      gamma0 = (e_t.array() * phi.array()).matrix();
    }

    if (lag == lag_grid[grid_pos]) {
      rates = gamma0;
      if (gru) rates += rho0 + eta0;
      if (first) rates += gamma1;
      out.row(static_cast<Eigen::Index>(grid_pos)) = mu * rates.transpose();
      if (++grid_pos == lag_grid.size()) break;
    }
  }
  return out;
}

EffRateTensor effective_rates(const CellKind& kind, const CellParams& params,
                              std::span<const StepCache> caches,
                              const std::vector<int>& lag_grid,
                              const std::vector<int>& anchors, double mu,
                              RateOrder order) {
  check_rate_grid(lag_grid);
  if (anchors.empty()) throw contract_error("effective_rates: no anchors");
  const RateWorkspace ws = prepare_rate_workspace(kind, params, caches, order);

  const int H = params.hidden_dim;
  EffRateTensor tensor;
  tensor.lag_grid = lag_grid;
  tensor.order = order;
  tensor.n_anchors = static_cast<long>(anchors.size());
  tensor.n_sequences = 1;
  tensor.values = Mat::Zero(static_cast<Eigen::Index>(lag_grid.size()), H);
  tensor.abs_values = Mat::Zero(static_cast<Eigen::Index>(lag_grid.size()), H);

  for (int t : anchors) {
    const Mat rates = per_anchor_rates(kind, caches, ws, lag_grid, t, mu, order);
    tensor.values += rates;
    tensor.abs_values += rates.cwiseAbs();
  }
  const double inv = 1.0 / static_cast<double>(anchors.size());
  tensor.values *= inv;
  tensor.abs_values *= inv;
  return tensor;
}

void merge_rates(EffRateTensor& acc, const EffRateTensor& part) {
  if (acc.n_sequences == 0) {
    acc = part;
    return;
  }
  if (acc.lag_grid != part.lag_grid || acc.order != part.order ||
      acc.n_anchors != part.n_anchors)
    throw contract_error("merge_rates: incompatible tensors");
  const double wa = static_cast<double>(acc.n_sequences);
  const double wb = static_cast<double>(part.n_sequences);
  const double inv = 1.0 / (wa + wb);
  acc.values = (wa * acc.values + wb * part.values) * inv;
  acc.abs_values = (wa * acc.abs_values + wb * part.abs_values) * inv;
  acc.n_sequences += part.n_sequences;
}

EnvelopeCurve envelope(const EffRateTensor& tensor) {
  EnvelopeCurve curve;
  curve.lag_grid = tensor.lag_grid;
  curve.f_values.resize(tensor.lag_grid.size());
  const bool has_abs = tensor.abs_values.size() == tensor.values.size() &&
                       tensor.abs_values.size() > 0;
  for (std::size_t k = 0; k < curve.f_values.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    curve.f_values[k] = has_abs ? tensor.abs_values.row(row).sum()
                                : tensor.values.row(row).cwiseAbs().sum();
  }
  return curve;
}

std::vector<int> integer_lag_grid(double min_lag, double max_lag, int count) {
  if (count < 1 || !(min_lag >= 1.0) || !(max_lag >= min_lag))
    throw config_error("lag grid: need 1 <= min <= max and count >= 1");
  std::vector<int> grid;
  for (int k = 0; k < count; ++k) {
    const double x = count == 1 ? min_lag
                                : min_lag + (max_lag - min_lag) * k /
                                      static_cast<double>(count - 1);
    const int lag = static_cast<int>(std::lround(x));
    if (grid.empty() || lag > grid.back()) grid.push_back(lag);
  }
  return grid;
}

}  // namespace gatediag
