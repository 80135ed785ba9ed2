#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apv/protocol.hpp"
#include "apv/scenario.hpp"

// Analyses behind the CLI subcommands. Each run_* writes its files into the
// output directory and returns a JSON summary; column meanings are listed in
// docs/data_dictionary.md.
namespace apv::commands {

struct Formats {
  bool csv = true;
  bool json = true;
};

struct CommandResult {
  nlohmann::json summary;
  std::vector<std::string> files;
  bool fit_failures_exceeded = false;
};

struct ShiftRow {
  geom::IonSite site;
  shifts::ShiftBudget budget;
  Vec3 pnc_vector = Vec3::Zero();
  double pnc_numeric = 0.0;  // Larmor projection of the time-grid oracle
};

struct ShiftTable {
  shifts::EtaModel eta;
  std::vector<ShiftRow> rows;
  double max_relative_oracle_deviation = 0.0;
};

ShiftTable compute_shift_table(const scenario::Scenario& s, const shifts::EtaModel& eta, int numeric_samples = 256);

struct RamseyRun {
  std::vector<shifts::ShiftBudget> budgets;
  std::vector<spin::RamseyOutcome> outcomes;
  spin::PhaseFit fit;
  double prior_phase = 0.0;
  double phase = 0.0;
  double rate = 0.0;
  double rate_sigma = 0.0;
  double signal_factor = 0.0;
  double delta_estimate = 0.0;
  double true_delta = 0.0;
};

/// Single configuration (no phase swap) with the nominal systematics.
RamseyRun compute_ramsey(const scenario::Scenario& s, const shifts::EtaModel& eta);

CommandResult run_shift(const scenario::Scenario& s, const std::string& out_dir, Formats formats);
CommandResult run_ramsey(const scenario::Scenario& s, const std::string& out_dir, Formats formats);
/// `fit_failures_exceeded` is set when the failure fraction is above the
/// configured threshold; files are written either way.
CommandResult run_montecarlo(const scenario::Scenario& s, const std::string& out_dir, Formats formats);
/// eta is calibrated once on the unmodified scenario, then `path` is set to
/// each grid value in turn. Throws Schema for an empty grid.
CommandResult run_sweep(const scenario::Scenario& s, std::string_view path, std::span<const double> grid,
                        const std::string& out_dir, Formats formats);
CommandResult run_calibrate(const scenario::Scenario& s, const std::string& out_dir, Formats formats);

/// Explicit directory if non-empty, else $APV_OUT_DIR if set, else the scenario's.
std::string output_directory(const scenario::Scenario& s, const std::string& explicit_dir);

}  // namespace apv::commands
