#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gatediag/cells.hpp"
#include "gatediag/task.hpp"
#include "gatediag/training.hpp"
#include "gatediag/transport.hpp"

namespace gatediag {

struct LagGridSpec {
  double min = 1.0;
  double max = 32.0;
  int count = 32;
};

struct SeedSpec {
  std::uint64_t master = 1;
  std::uint64_t probe = 1;
};

// The one structured document driving a whole study. Unknown fields are
// rejected; every stage derives its substream seeds from `seeds.master`.
struct StudyConfig {
  TaskConfig task;  // task.seed and task.direction are derived, not read
  TrainConfig train;
  std::vector<std::string> cells;
  double const_gate_value = 0.5;
  int hidden_dim = 16;
  LagGridSpec lag_grid;
  long n_train_sequences = 400;
  long diagnostic_count = 400;
  std::vector<double> budget_grid;
  double epsilon = 0.05;
  double c_alpha = 1.0;
  SeedSpec seeds;
  RateOrder order = RateOrder::ZerothPlusFirst;
  std::string out_dir = "out";
};

void validate(const StudyConfig& cfg);

StudyConfig parse_config(const std::string& json_text);
StudyConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const StudyConfig& cfg);  // exact echo

std::vector<int> study_lag_grid(const StudyConfig& cfg);
std::vector<CellKind> study_kinds(const StudyConfig& cfg);

}  // namespace gatediag
