#include "gatediag/config.hpp"

#include <set>

#include <json.hpp>

#include "gatediag/io.hpp"
#include "gatediag/rng.hpp"

namespace gatediag {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& scope) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw config_error(scope + ": unknown field '" + it.key() + "'");
}

template <typename T>
T require(const json& obj, const std::string& scope, const std::string& key) {
  if (!obj.contains(key))
    throw config_error(scope + "." + key + ": missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(scope + "." + key + ": wrong type");
  }
}

template <typename T>
T optional(const json& obj, const std::string& scope, const std::string& key,
           T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(scope + "." + key + ": wrong type");
  }
}

}  // namespace

void validate(const StudyConfig& cfg) {
  if (cfg.task.input_dim < 1) throw config_error("task.D: must be >= 1");
  TaskConfig task = cfg.task;
  task.direction = random_unit_vector(task.input_dim, 0);  // shape-only stand-in
  validate(task);
  validate(cfg.train);
  if (cfg.cells.empty()) throw config_error("cells: must name at least one kind");
  for (const std::string& name : cfg.cells) make_kind(name, cfg.const_gate_value);
  if (cfg.hidden_dim < 1) throw config_error("H: must be >= 1");
  if (!(cfg.lag_grid.min >= 1.0) || !(cfg.lag_grid.max >= cfg.lag_grid.min) ||
      cfg.lag_grid.count < 1)
    throw config_error("lag_grid: need 1 <= min <= max and count >= 1");
  if (cfg.lag_grid.max > cfg.task.seq_len - 1)
    throw config_error("lag_grid.max: must be within (0, T-1]");
  if (cfg.n_train_sequences < 1)
    throw config_error("n_train_sequences: must be >= 1");
  if (cfg.diagnostic_count < 100)
    throw config_error("diagnostic_count: must be >= 100");
  if (cfg.budget_grid.empty())
    throw config_error("budget_grid: must be nonempty");
  for (std::size_t k = 0; k < cfg.budget_grid.size(); ++k) {
    if (!(cfg.budget_grid[k] >= 1.0) ||
        (k > 0 && cfg.budget_grid[k] <= cfg.budget_grid[k - 1]))
      throw config_error("budget_grid: must be increasing, entries >= 1");
  }
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 0.5))
    throw config_error("epsilon: must lie in (0, 1/2)");
  if (!(cfg.c_alpha > 0.0)) throw config_error("c_alpha: must be > 0");
  if (cfg.out_dir.empty()) throw config_error("out_dir: must be nonempty");
}

StudyConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("config: root must be an object");

  reject_unknown(doc,
                 {"task", "train", "cells", "const_gate_value", "H",
                  "lag_grid", "n_train_sequences", "diagnostic_count",
                  "budget_grid", "epsilon", "c_alpha", "seeds", "order",
                  "out_dir"},
                 "config");

  StudyConfig cfg;

  const json task = require<json>(doc, "config", "task");
  reject_unknown(task, {"D", "T", "lags", "coefficients", "noise_std"}, "task");
  cfg.task.input_dim = require<int>(task, "task", "D");
  cfg.task.seq_len = require<int>(task, "task", "T");
  cfg.task.lags = require<std::vector<int>>(task, "task", "lags");
  cfg.task.coefficients =
      require<std::vector<double>>(task, "task", "coefficients");
  cfg.task.noise_std = require<double>(task, "task", "noise_std");

  const json train = require<json>(doc, "config", "train");
  reject_unknown(train,
                 {"optimizer", "learning_rate", "weight_decay", "momentum",
                  "beta1", "beta2", "adam_eps", "batch_size", "epochs",
                  "clip_norm"},
                 "train");
  cfg.train.optimizer =
      parse_optimizer(require<std::string>(train, "train", "optimizer"));
  cfg.train.learning_rate = require<double>(train, "train", "learning_rate");
  cfg.train.weight_decay = optional(train, "train", "weight_decay", 1e-4);
  cfg.train.momentum = optional(train, "train", "momentum", 0.9);
  cfg.train.beta1 = optional(train, "train", "beta1", 0.9);
  cfg.train.beta2 = optional(train, "train", "beta2", 0.999);
  cfg.train.adam_eps = optional(train, "train", "adam_eps", 1e-8);
  cfg.train.batch_size = require<int>(train, "train", "batch_size");
  cfg.train.epochs = require<int>(train, "train", "epochs");
  cfg.train.clip_norm = optional(train, "train", "clip_norm", 1.0);

  cfg.cells = require<std::vector<std::string>>(doc, "config", "cells");
  cfg.const_gate_value = optional(doc, "config", "const_gate_value", 0.5);
  cfg.hidden_dim = require<int>(doc, "config", "H");

  const json grid = require<json>(doc, "config", "lag_grid");
  reject_unknown(grid, {"min", "max", "count"}, "lag_grid");
  cfg.lag_grid.min = require<double>(grid, "lag_grid", "min");
  cfg.lag_grid.max = require<double>(grid, "lag_grid", "max");
  cfg.lag_grid.count = require<int>(grid, "lag_grid", "count");

  cfg.n_train_sequences = require<long>(doc, "config", "n_train_sequences");
  cfg.diagnostic_count = require<long>(doc, "config", "diagnostic_count");
  cfg.budget_grid = require<std::vector<double>>(doc, "config", "budget_grid");
  cfg.epsilon = optional(doc, "config", "epsilon", 0.05);
  cfg.c_alpha = optional(doc, "config", "c_alpha", 1.0);

  const json seeds = require<json>(doc, "config", "seeds");
  reject_unknown(seeds, {"master", "probe"}, "seeds");
  cfg.seeds.master = require<std::uint64_t>(seeds, "seeds", "master");
  cfg.seeds.probe = require<std::uint64_t>(seeds, "seeds", "probe");

  cfg.order = parse_order(optional<std::string>(doc, "config", "order",
                                                "zeroth_plus_first"));
  cfg.out_dir = optional<std::string>(doc, "config", "out_dir", "out");

  // Derived streams; the document never carries these directly.
  cfg.task.seed = derive_seed(cfg.seeds.master, "data");
  cfg.task.direction =
      random_unit_vector(cfg.task.input_dim, derive_seed(cfg.seeds.master, "direction"));
  cfg.train.seed = derive_seed(cfg.seeds.master, "train");

  validate(cfg);
  return cfg;
}

StudyConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

std::string config_to_json(const StudyConfig& cfg) {
  json doc;
  doc["task"] = {{"D", cfg.task.input_dim},
                 {"T", cfg.task.seq_len},
                 {"lags", cfg.task.lags},
                 {"coefficients", cfg.task.coefficients},
                 {"noise_std", cfg.task.noise_std}};
  doc["train"] = {{"optimizer", optimizer_name(cfg.train.optimizer)},
                  {"learning_rate", cfg.train.learning_rate},
                  {"weight_decay", cfg.train.weight_decay},
                  {"momentum", cfg.train.momentum},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"clip_norm", cfg.train.clip_norm}};
  doc["cells"] = cfg.cells;
  doc["const_gate_value"] = cfg.const_gate_value;
  doc["H"] = cfg.hidden_dim;
  doc["lag_grid"] = {{"min", cfg.lag_grid.min},
                     {"max", cfg.lag_grid.max},
                     {"count", cfg.lag_grid.count}};
  doc["n_train_sequences"] = cfg.n_train_sequences;
  doc["diagnostic_count"] = cfg.diagnostic_count;
  doc["budget_grid"] = cfg.budget_grid;
  doc["epsilon"] = cfg.epsilon;
  doc["c_alpha"] = cfg.c_alpha;
  doc["seeds"] = {{"master", cfg.seeds.master}, {"probe", cfg.seeds.probe}};
  doc["order"] = order_name(cfg.order);
  doc["out_dir"] = cfg.out_dir;
  return doc.dump(2);
}

std::vector<int> study_lag_grid(const StudyConfig& cfg) {
  return integer_lag_grid(cfg.lag_grid.min, cfg.lag_grid.max, cfg.lag_grid.count);
}

std::vector<CellKind> study_kinds(const StudyConfig& cfg) {
  std::vector<CellKind> kinds;
  for (const std::string& name : cfg.cells)
    kinds.push_back(make_kind(name, cfg.const_gate_value));
  return kinds;
}

}  // namespace gatediag
