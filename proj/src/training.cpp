#include "gatediag/training.hpp"

#include <cmath>

#include "gatediag/parallel.hpp"
#include "gatediag/rng.hpp"

namespace gatediag {

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::Sgd;
  if (name == "momentum") return Optimizer::Momentum;
  if (name == "adamw") return Optimizer::AdamW;
  throw config_error("unknown optimizer: " + std::string(name));
}

std::string optimizer_name(Optimizer opt) {
  switch (opt) {
    case Optimizer::Sgd: return "sgd";
    case Optimizer::Momentum: return "momentum";
    case Optimizer::AdamW: return "adamw";
  }
  return "?";
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw config_error("train.learning_rate: must be > 0");
  if (!(cfg.clip_norm > 0.0)) throw config_error("train.clip_norm: must be > 0");
  if (cfg.batch_size < 1) throw config_error("train.batch_size: must be >= 1");
  if (cfg.epochs < 0) throw config_error("train.epochs: must be >= 0");
  if (!(cfg.weight_decay >= 0.0)) throw config_error("train.weight_decay: must be >= 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw config_error("train.momentum: must lie in [0, 1)");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw config_error("train.betas: must lie in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) throw config_error("train.adam_eps: must be > 0");
}

ModelParams init_model(const CellKind& kind, int input_dim, int hidden_dim,
                       std::uint64_t seed) {
  ModelParams m;
  m.cell = init_params(kind, input_dim, hidden_dim, seed);
  Rng rng(derive_seed(seed, "readout-init"));
  m.w_out.resize(hidden_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (int q = 0; q < hidden_dim; ++q) m.w_out(q) = scale * rng.normal();
  m.b_out = 0.0;
  return m;
}

void for_each_tensor(ModelParams& m,
                     const std::function<void(const char*, double*, std::size_t)>& fn) {
  for_each_tensor(m.cell, fn);
  fn("w_out", m.w_out.data(), static_cast<std::size_t>(m.w_out.size()));
  fn("b_out", &m.b_out, 1);
}

void for_each_tensor(const ModelParams& m,
                     const std::function<void(const char*, const double*, std::size_t)>& fn) {
  for_each_tensor(m.cell, fn);
  fn("w_out", m.w_out.data(), static_cast<std::size_t>(m.w_out.size()));
  fn("b_out", &m.b_out, 1);
}

std::size_t param_count(const ModelParams& m) {
  return cell_param_count(m.cell) + static_cast<std::size_t>(m.w_out.size()) + 1;
}

ModelParams zeros_like(const ModelParams& m) {
  ModelParams z;
  z.cell = zeros_like(m.cell);
  z.w_out = Vec::Zero(m.w_out.size());
  z.b_out = 0.0;
  return z;
}

double forward_loss(const ModelParams& model, const CellKind& kind,
                    const Dataset& data, std::span<const std::size_t> indices,
                    ForwardCache& cache) {
  if (indices.empty()) throw contract_error("forward_loss: empty batch");
  cache.trajectories.resize(indices.size());
  cache.predictions.resize(indices.size());

  parallel_for(indices.size(), [&](std::size_t b) {
    const Sequence& seq = data.sequences[indices[b]];
    cache.trajectories[b] = run_sequence(kind, model.cell, seq.inputs);
    const auto T = seq.inputs.rows();
    Vec pred(T);
    for (Eigen::Index t = 0; t < T; ++t)
      pred(t) = model.w_out.dot(
                    cache.trajectories[b].states[static_cast<std::size_t>(t)].h) +
                model.b_out;
    cache.predictions[b] = std::move(pred);
  });

  double sq_sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Sequence& seq = data.sequences[indices[b]];
    for (Eigen::Index t = 0; t < seq.targets.size(); ++t) {
      if (!seq.valid[static_cast<std::size_t>(t)]) continue;
      const double r = cache.predictions[b](t) - seq.targets(t);
      sq_sum += r * r;
      ++valid;
    }
  }
  cache.valid_count = valid;
  if (valid == 0) throw contract_error("forward_loss: no valid targets in batch");
  return sq_sum / static_cast<double>(valid);
}

namespace {

struct SeqGrads {
  ModelParams grads;
  Mat delta;  // T x H
};

// Reverse pass over one sequence; adds into `out`.
void backward_sequence(const ModelParams& model, const CellKind& kind,
                       const Sequence& seq, const Trajectory& traj,
                       const Vec& pred, double inv_valid, SeqGrads& out) {
  const int H = model.cell.hidden_dim;
  const auto T = seq.inputs.rows();
  const CellParams& p = model.cell;
  ModelParams& g = out.grads;
  out.delta = Mat::Zero(T, H);

  Vec lam = Vec::Zero(H);
  Vec lam_c = has_cell_state(kind) ? Vec::Zero(H) : Vec();

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const StepCache& cc = traj.caches[static_cast<std::size_t>(t)];
    if (seq.valid[static_cast<std::size_t>(t)]) {
      const double rs = 2.0 * inv_valid * (pred(t) - seq.targets(t));
      out.delta.row(t) = rs * model.w_out.transpose();
      lam += rs * model.w_out;
      g.w_out += rs * cc.h_new;
      g.b_out += rs;
    }

    switch (kind.tag) {
      case CellTag::ConstGate: {
        const double s = cc.gate_scalar;
        const Vec d_a =
            (s * lam.array() * (1.0 - cc.cand.array().square())).matrix();
        g.cell.W_h += d_a * cc.x.transpose();
        g.cell.U_h += d_a * cc.h_prev.transpose();
        g.cell.b_h += d_a;
        lam = (1.0 - s) * lam + p.U_h.transpose() * d_a;
        break;
      }
      case CellTag::SharedGate: {
        const double s = cc.gate_scalar;
        const Vec d_a =
            (s * lam.array() * (1.0 - cc.cand.array().square())).matrix();
        const double d_as = lam.dot(cc.cand - cc.h_prev) * s * (1.0 - s);
        g.cell.W_h += d_a * cc.x.transpose();
        g.cell.U_h += d_a * cc.h_prev.transpose();
        g.cell.b_h += d_a;
        g.cell.w_s += d_as * cc.x;
        g.cell.u_s += d_as * cc.h_prev;
        g.cell.b_s_scalar += d_as;
        lam = (1.0 - s) * lam + p.U_h.transpose() * d_a + d_as * p.u_s;
        break;
      }
      case CellTag::DiagGate: {
        const Vec& s = cc.gate;
        const Vec d_a =
            (s.array() * lam.array() * (1.0 - cc.cand.array().square())).matrix();
        const Vec d_as = (lam.array() * (cc.cand - cc.h_prev).array() *
                          s.array() * (1.0 - s.array())).matrix();
        g.cell.W_h += d_a * cc.x.transpose();
        g.cell.U_h += d_a * cc.h_prev.transpose();
        g.cell.b_h += d_a;
        g.cell.W_s += d_as * cc.x.transpose();
        g.cell.U_s += d_as * cc.h_prev.transpose();
        g.cell.b_s += d_as;
        lam = (lam.array() * (1.0 - s.array())).matrix() +
              p.U_h.transpose() * d_a + p.U_s.transpose() * d_as;
        break;
      }
      case CellTag::GRU: {
        const Vec& z = cc.gate;
        const Vec d_ag =
            (z.array() * lam.array() * (1.0 - cc.cand.array().square())).matrix();
        const Vec d_az = (lam.array() * (cc.cand - cc.h_prev).array() *
                          z.array() * (1.0 - z.array())).matrix();
        const Vec back = p.U_h.transpose() * d_ag;
        const Vec d_ar = (back.array() * cc.h_prev.array() * cc.reset.array() *
                          (1.0 - cc.reset.array())).matrix();
        g.cell.W_h += d_ag * cc.x.transpose();
        g.cell.U_h += d_ag * cc.reset_h_prev.transpose();
        g.cell.b_h += d_ag;
        g.cell.W_z += d_az * cc.x.transpose();
        g.cell.U_z += d_az * cc.h_prev.transpose();
        g.cell.b_z += d_az;
        g.cell.W_r += d_ar * cc.x.transpose();
        g.cell.U_r += d_ar * cc.h_prev.transpose();
        g.cell.b_r += d_ar;
        lam = (lam.array() * (1.0 - z.array())).matrix() +
              (back.array() * cc.reset.array()).matrix() +
              p.U_z.transpose() * d_az + p.U_r.transpose() * d_ar;
        break;
      }
      case CellTag::LSTM: {
        const Vec& i = cc.gate;
        const Vec d_o = (lam.array() * cc.tanh_c.array()).matrix();
        lam_c += (lam.array() * cc.o.array() *
                  (1.0 - cc.tanh_c.array().square())).matrix();
        const Vec d_f = (lam_c.array() * cc.c_prev.array()).matrix();
        const Vec d_i = (lam_c.array() * cc.cand.array()).matrix();
        const Vec d_g = (lam_c.array() * i.array()).matrix();
        const Vec d_ai = (d_i.array() * i.array() * (1.0 - i.array())).matrix();
        const Vec d_af =
            (d_f.array() * cc.f.array() * (1.0 - cc.f.array())).matrix();
        const Vec d_ao =
            (d_o.array() * cc.o.array() * (1.0 - cc.o.array())).matrix();
        const Vec d_ag = (d_g.array() * (1.0 - cc.cand.array().square())).matrix();
        g.cell.W_i += d_ai * cc.x.transpose();
        g.cell.U_i += d_ai * cc.h_prev.transpose();
        g.cell.b_i += d_ai;
        g.cell.W_f += d_af * cc.x.transpose();
        g.cell.U_f += d_af * cc.h_prev.transpose();
        g.cell.b_f += d_af;
        g.cell.W_o += d_ao * cc.x.transpose();
        g.cell.U_o += d_ao * cc.h_prev.transpose();
        g.cell.b_o += d_ao;
        g.cell.W_g += d_ag * cc.x.transpose();
        g.cell.U_g += d_ag * cc.h_prev.transpose();
        g.cell.b_g += d_ag;
        lam = p.U_i.transpose() * d_ai + p.U_f.transpose() * d_af +
              p.U_o.transpose() * d_ao + p.U_g.transpose() * d_ag;
        lam_c = (lam_c.array() * cc.f.array()).matrix();
        break;
      }
    }
  }
}

void add_into(ModelParams& acc, const ModelParams& part) {
  std::vector<std::pair<double*, std::size_t>> dst;
  for_each_tensor(acc, [&](const char*, double* d, std::size_t n) {
    dst.push_back({d, n});
  });
  std::size_t i = 0;
  for_each_tensor(part, [&](const char*, const double* s, std::size_t n) {
    double* d = dst[i++].first;
    for (std::size_t k = 0; k < n; ++k) d[k] += s[k];
  });
}

GradientBundle reduce_bundles(const ModelParams& model,
                              std::vector<SeqGrads>& parts) {
  GradientBundle bundle;
  bundle.grads = zeros_like(model);
  bundle.deltas.reserve(parts.size());
  for (SeqGrads& part : parts) {
    add_into(bundle.grads, part.grads);
    bundle.deltas.push_back(std::move(part.delta));
  }
  return bundle;
}

template <typename Loop>
GradientBundle bptt_impl(const ModelParams& model, const CellKind& kind,
                         const Dataset& data,
                         std::span<const std::size_t> indices,
                         const ForwardCache& cache, const Loop& loop) {
  if (cache.trajectories.size() != indices.size())
    throw contract_error("bptt_gradients: cache does not match batch");
  const double inv_valid = 1.0 / static_cast<double>(cache.valid_count);
  std::vector<SeqGrads> parts(indices.size());
  loop(indices.size(), [&](std::size_t b) {
    parts[b].grads = zeros_like(model);
    backward_sequence(model, kind, data.sequences[indices[b]],
                      cache.trajectories[b], cache.predictions[b], inv_valid,
                      parts[b]);
  });
  return reduce_bundles(model, parts);
}

}  // namespace

GradientBundle bptt_gradients(const ModelParams& model, const CellKind& kind,
                              const Dataset& data,
                              std::span<const std::size_t> indices,
                              const ForwardCache& cache) {
  return bptt_impl(model, kind, data, indices, cache,
                   [](std::size_t n, const std::function<void(std::size_t)>& f) {
                     parallel_for(n, f);
                   });
}

GradientBundle bptt_gradients_serial(const ModelParams& model,
                                     const CellKind& kind, const Dataset& data,
                                     std::span<const std::size_t> indices,
                                     const ForwardCache& cache) {
  return bptt_impl(model, kind, data, indices, cache,
                   [](std::size_t n, const std::function<void(std::size_t)>& f) {
                     serial_for(n, f);
                   });
}

double global_norm(const GradientBundle& g) {
  double sq = 0.0;
  for_each_tensor(g.grads, [&](const char*, const double* d, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) sq += d[k] * d[k];
  });
  return std::sqrt(sq);
}

GradientBundle clip_global_norm(GradientBundle g, double threshold) {
  if (!(threshold > 0.0))
    throw contract_error("clip_global_norm: threshold must be > 0");
  const double norm = global_norm(g);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for_each_tensor(g.grads, [&](const char*, double* d, std::size_t n) {
      for (std::size_t k = 0; k < n; ++k) d[k] *= scale;
    });
  }
  return g;
}

OptState init_opt_state(const ModelParams& model, const TrainConfig& cfg) {
  OptState state;
  if (cfg.optimizer != Optimizer::Sgd) state.first_moment = zeros_like(model);
  if (cfg.optimizer == Optimizer::AdamW) state.second_moment = zeros_like(model);
  return state;
}

void optimizer_step(OptState& state, ModelParams& model,
                    const GradientBundle& g, const TrainConfig& cfg) {
  const double norm = global_norm(g);
  if (!std::isfinite(norm))
    throw training_error("optimizer_step: non-finite gradient");
  state.step_count += 1;
  const double mu = cfg.learning_rate;

  // Walks parameters and the matching gradient/moment entries in lockstep;
  // tensor order is identical across the mirrored records.
  std::vector<std::pair<double*, std::size_t>> params, moments1, moments2;
  std::vector<std::pair<const double*, std::size_t>> grads;
  for_each_tensor(model, [&](const char*, double* d, std::size_t n) { params.push_back({d, n}); });
  for_each_tensor(g.grads, [&](const char*, const double* d, std::size_t n) { grads.push_back({d, n}); });
  if (cfg.optimizer != Optimizer::Sgd)
    for_each_tensor(state.first_moment, [&](const char*, double* d, std::size_t n) { moments1.push_back({d, n}); });
  if (cfg.optimizer == Optimizer::AdamW)
    for_each_tensor(state.second_moment, [&](const char*, double* d, std::size_t n) { moments2.push_back({d, n}); });

  for (std::size_t s = 0; s < params.size(); ++s) {
    double* p = params[s].first;
    const double* gr = grads[s].first;
    const std::size_t n = params[s].second;
    switch (cfg.optimizer) {
      case Optimizer::Sgd:
        for (std::size_t k = 0; k < n; ++k) p[k] -= mu * gr[k];
        break;
      case Optimizer::Momentum: {
        double* v = moments1[s].first;
        for (std::size_t k = 0; k < n; ++k) {
          v[k] = cfg.momentum * v[k] + gr[k];
          p[k] -= mu * v[k];
        }
        break;
      }
      case Optimizer::AdamW: {
        double* m = moments1[s].first;
        double* v = moments2[s].first;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
        for (std::size_t k = 0; k < n; ++k) {
          m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gr[k];
          v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gr[k] * gr[k];
          const double m_hat = m[k] / bc1;
          const double v_hat = v[k] / bc2;
          p[k] -= mu * cfg.weight_decay * p[k];  // decoupled decay
          p[k] -= mu * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
        break;
      }
    }
  }
}

TrainResult train(const CellKind& kind, int hidden_dim,
                  std::uint64_t model_seed, const Dataset& data,
                  const TrainConfig& cfg) {
  validate(cfg);
  if (data.sequences.empty()) throw contract_error("train: empty dataset");

  TrainResult result;
  result.model = init_model(kind, data.input_dim, hidden_dim, model_seed);
  OptState state = init_opt_state(result.model, cfg);

  const std::size_t n = data.sequences.size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t k = n; k > 1; --k) {
      const std::size_t j = shuffle_rng.next_u64() % k;
      std::swap(order[k - 1], order[j]);
    }

    double weighted_loss = 0.0;
    std::size_t weight = 0;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len =
          std::min(static_cast<std::size_t>(cfg.batch_size), n - begin);
      std::span<const std::size_t> batch(order.data() + begin, len);
      ForwardCache cache;
      const double loss = forward_loss(result.model, kind, data, batch, cache);
      if (!std::isfinite(loss))
        throw training_error("train: loss diverged at epoch " + std::to_string(epoch));
      weighted_loss += loss * static_cast<double>(cache.valid_count);
      weight += cache.valid_count;
      GradientBundle grads = bptt_gradients(result.model, kind, data, batch, cache);
      grads = clip_global_norm(std::move(grads), cfg.clip_norm);
      optimizer_step(state, result.model, grads, cfg);
    }
    result.loss_history.push_back(weighted_loss / static_cast<double>(weight));
  }
  return result;
}

}  // namespace gatediag
