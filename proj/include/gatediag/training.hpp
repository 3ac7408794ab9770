#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gatediag/cells.hpp"
#include "gatediag/common.hpp"
#include "gatediag/task.hpp"

namespace gatediag {

enum class Optimizer { Sgd, Momentum, AdamW };

Optimizer parse_optimizer(std::string_view name);
std::string optimizer_name(Optimizer opt);

struct TrainConfig {
  Optimizer optimizer = Optimizer::AdamW;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;   // decoupled, AdamW only
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int epochs = 50;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// Cell plus linear readout y_t = w'h_t + b.
struct ModelParams {
  CellParams cell;
  Vec w_out;
  double b_out = 0.0;
};

ModelParams init_model(const CellKind& kind, int input_dim, int hidden_dim,
                       std::uint64_t seed);

// Visits cell tensors in canonical order, then the readout.
void for_each_tensor(ModelParams& m,
                     const std::function<void(const char*, double*, std::size_t)>& fn);
void for_each_tensor(const ModelParams& m,
                     const std::function<void(const char*, const double*, std::size_t)>& fn);
std::size_t param_count(const ModelParams& m);
ModelParams zeros_like(const ModelParams& m);

// Gradients mirror the parameter shapes; `deltas` keeps the per-step local
// loss gradients of every sequence in the batch (T x H each).
struct GradientBundle {
  ModelParams grads;
  std::vector<Mat> deltas;
};

struct ForwardCache {
  std::vector<Trajectory> trajectories;  // one per batch sequence
  std::vector<Vec> predictions;          // T each
  std::size_t valid_count = 0;           // loss normalizer over the batch
};

// Mean squared error over valid steps of the selected sequences.
double forward_loss(const ModelParams& model, const CellKind& kind,
                    const Dataset& data, std::span<const std::size_t> indices,
                    ForwardCache& cache);

// Exact full-unroll reverse-mode gradients via backward adjoint
// accumulation. Sequences run in parallel; partial bundles are reduced in
// index order, so the result is independent of the worker count.
GradientBundle bptt_gradients(const ModelParams& model, const CellKind& kind,
                              const Dataset& data,
                              std::span<const std::size_t> indices,
                              const ForwardCache& cache);
GradientBundle bptt_gradients_serial(const ModelParams& model,
                                     const CellKind& kind, const Dataset& data,
                                     std::span<const std::size_t> indices,
                                     const ForwardCache& cache);

double global_norm(const GradientBundle& g);
GradientBundle clip_global_norm(GradientBundle g, double threshold);

struct OptState {
  ModelParams first_moment;   // AdamW m / momentum velocity
  ModelParams second_moment;  // AdamW v
  long step_count = 0;
};

OptState init_opt_state(const ModelParams& model, const TrainConfig& cfg);
void optimizer_step(OptState& state, ModelParams& model,
                    const GradientBundle& g, const TrainConfig& cfg);

struct TrainResult {
  ModelParams model;
  std::vector<double> loss_history;  // per-epoch mean loss
};

// Epoch loop over mini-batches of a seeded shuffle stream.
TrainResult train(const CellKind& kind, int hidden_dim,
                  std::uint64_t model_seed, const Dataset& data,
                  const TrainConfig& cfg);

}  // namespace gatediag
