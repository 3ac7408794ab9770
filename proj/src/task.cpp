#include "gatediag/task.hpp"

#include <cmath>

#include "gatediag/parallel.hpp"
#include "gatediag/rng.hpp"

namespace gatediag {

void validate(const TaskConfig& cfg) {
  if (cfg.input_dim < 1) throw config_error("task.D: must be >= 1");
  if (cfg.seq_len < 1) throw config_error("task.T: must be >= 1");
  if (cfg.lags.empty()) throw config_error("task.lags: must be nonempty");
  if (cfg.lags.size() != cfg.coefficients.size())
    throw config_error("task.coefficients: must match task.lags in length");
  for (std::size_t k = 0; k < cfg.lags.size(); ++k) {
    if (cfg.lags[k] < 1 || (k > 0 && cfg.lags[k] <= cfg.lags[k - 1]))
      throw config_error("task.lags: must be increasing positive integers");
  }
  if (cfg.lags.back() >= cfg.seq_len)
    throw config_error("task.lags: max lag must be < T");
  if (!(cfg.noise_std >= 0.0)) throw config_error("task.noise_std: must be >= 0");
  if (cfg.direction.size() != cfg.input_dim)
    throw config_error("task.direction: dimension mismatch");
  if (std::abs(cfg.direction.norm() - 1.0) > 1e-12)
    throw config_error("task.direction: must have unit norm");
}

Vec random_unit_vector(int dim, std::uint64_t seed) {
  if (dim < 1) throw contract_error("random_unit_vector: dim must be >= 1");
  Rng rng(derive_seed(seed, "unit-vector"));
  Vec v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
    norm = v.norm();
  }
  return v / norm;
}

Dataset generate_task(const TaskConfig& cfg, std::size_t n_sequences,
                      std::uint64_t seed) {
  validate(cfg);
  Dataset data;
  data.input_dim = cfg.input_dim;
  data.seq_len = cfg.seq_len;
  data.sequences.resize(n_sequences);

  const int max_lag = cfg.lags.back();
  const std::uint64_t base = derive_seed(cfg.seed, "task", seed);

  parallel_for(n_sequences, [&](std::size_t n) {
    Rng rng(derive_seed(base, "sequence", n));
    Sequence& seq = data.sequences[n];
    seq.inputs.resize(cfg.seq_len, cfg.input_dim);
    for (int t = 0; t < cfg.seq_len; ++t)
      for (int d = 0; d < cfg.input_dim; ++d) seq.inputs(t, d) = rng.normal();

    seq.targets = Vec::Zero(cfg.seq_len);
    seq.valid.assign(static_cast<std::size_t>(cfg.seq_len), 0);
    for (int t = max_lag; t < cfg.seq_len; ++t) {
      double y = 0.0;
      for (std::size_t k = 0; k < cfg.lags.size(); ++k)
        y += cfg.coefficients[k] *
             cfg.direction.dot(seq.inputs.row(t - cfg.lags[k]).transpose());
      if (cfg.noise_std > 0.0) y += cfg.noise_std * rng.normal();
      seq.targets(t) = y;
      seq.valid[static_cast<std::size_t>(t)] = 1;
    }
  });
  return data;
}

}  // namespace gatediag
