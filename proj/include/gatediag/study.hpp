#pragma once

#include <filesystem>

#include "gatediag/config.hpp"
#include "gatediag/learnability.hpp"
#include "gatediag/spectra.hpp"

namespace gatediag {

struct KindDiagnostics {
  EffRateTensor rates;
  EnvelopeCurve envelope_curve;
  MatchedSamples matched;
  NoiseProfile noise;
  TauSpectrum tau;
};

// One full diagnostic sweep for a frozen model over the diagnostic set:
// effective rates, two-pass matched statistics, per-lag noise fits, and
// the time-scale spectrum. Sequences run in parallel with per-slot writes
// and an index-ordered reduction, so worker count never affects results.
KindDiagnostics diagnose_kind(const CellKind& kind, const ModelParams& model,
                              const Dataset& data,
                              const std::vector<int>& lag_grid, double mu,
                              RateOrder order, const ProbeVector& probe);
// Serial reference twin.
KindDiagnostics diagnose_kind_serial(const CellKind& kind,
                                     const ModelParams& model,
                                     const Dataset& data,
                                     const std::vector<int>& lag_grid,
                                     double mu, RateOrder order,
                                     const ProbeVector& probe);

// Pipeline stages. Each writes into a stage directory under `out_root` and
// reads its inputs from sibling stage directories (or explicit overrides).
void cmd_gen(const StudyConfig& cfg, const std::filesystem::path& out_root);
// Returns the number of kinds whose training diverged (their checkpoints
// are skipped; the others complete).
int cmd_train(const StudyConfig& cfg, const std::filesystem::path& data_dir,
              const std::filesystem::path& out_root);
// Returns the number of kinds skipped for missing checkpoints.
int cmd_diagnose(const StudyConfig& cfg,
                 const std::filesystem::path& checkpoint_dir,
                 const std::filesystem::path& data_dir,
                 const std::filesystem::path& out_root);
void cmd_window(const StudyConfig& cfg, const std::filesystem::path& diag_dir,
                const std::filesystem::path& train_dir,
                const std::filesystem::path& out_root);
void cmd_plot(const std::filesystem::path& report_path,
              const std::filesystem::path& out_dir);

// Compact self-check suite behind the `verify` subcommand; prints one line
// per property and returns the number of failures.
int run_verify();

}  // namespace gatediag
