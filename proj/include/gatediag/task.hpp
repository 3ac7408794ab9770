#pragma once

#include <cstdint>
#include <vector>

#include "gatediag/common.hpp"

namespace gatediag {

// Delayed-regression task: the target at time t is a weighted sum of the
// input projected on a fixed unit direction at a handful of earlier steps,
// plus Gaussian noise. Targets inside the burn-in (t up to the largest lag)
// are flagged invalid and excluded from every loss.
struct TaskConfig {
  int input_dim = 16;
  int seq_len = 1024;
  std::vector<int> lags;              // increasing, positive, < seq_len
  std::vector<double> coefficients;   // same length as lags
  double noise_std = 0.3;
  Vec direction;                      // unit vector, |norm - 1| <= 1e-12
  std::uint64_t seed = 0;
};

struct Sequence {
  Mat inputs;                      // T x D
  Vec targets;                     // T
  std::vector<std::uint8_t> valid; // T; 0 inside the burn-in
};

struct Dataset {
  int input_dim = 0;
  int seq_len = 0;
  std::vector<Sequence> sequences;
};

void validate(const TaskConfig& cfg);

Vec random_unit_vector(int dim, std::uint64_t seed);

// Deterministic per (cfg.seed, seed, sequence index); sequences are
// generated from independent substreams so any prefix of the dataset is
// stable under a count change.
Dataset generate_task(const TaskConfig& cfg, std::size_t n_sequences,
                      std::uint64_t seed);

}  // namespace gatediag
