#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "apv/field_geometry.hpp"
#include "apv/protocol.hpp"
#include "apv/shifts.hpp"

namespace apv::scenario {

inline constexpr int kSchemaVersion = 1;

struct CampaignSettings {
  double wait_s = 1.0;
  std::uint64_t shots_per_point = 5000;
  int analysis_phase_points = 32;
  int trials = 1000;
  std::uint64_t master_seed = 1;
  double contrast = 1.0;
  double cycle_time_s = 1.0;
  double total_time_s = 3600.0;
  double max_fit_failure_fraction = 0.01;
  int threads = 1;
  bool noiseless = false;
};

struct OutputSettings {
  std::string directory = "apv_out";
  bool csv = true;
  bool json = true;
};

/// Parsed scenario file. `document` keeps the validated source so overrides
/// can be applied by path and re-validated.
struct Scenario {
  nlohmann::json document;
  geom::FieldConfiguration fields = geom::default_configuration();
  int ion_count = 2;
  Vec3 ion_origin = Vec3::Zero();
  Vec3 trap_axis = Vec3::UnitX();
  std::optional<double> eta_target_Hz;
  std::optional<double> eta_e_a0;
  double omega_over_rabi = 1.0;
  protocol::SystematicsBudget systematics;
  CampaignSettings campaign;
  OutputSettings output;
};

/// Strict: unknown keys, missing required keys and wrong types throw
/// Error(Schema) with the dotted key path in the message.
Scenario parse_scenario(const nlohmann::json& document);
Scenario parse_scenario_text(std::string_view text);
Scenario load_scenario(const std::string& path);

/// Sets `path` (dot separated, numeric segments index arrays) and re-validates.
Scenario with_override(const Scenario& base, std::string_view path, const nlohmann::json& value);

/// The reference default scenario as a document (crossed 2052 nm waves, two ions).
nlohmann::json default_document();

/// Calibrates at the first ion when a target is given, else uses eta_e_a0.
shifts::EtaModel resolve_eta(const Scenario& s);

std::vector<geom::IonSite> ion_sites(const Scenario& s);

protocol::CampaignConfig campaign_config(const Scenario& s, const shifts::EtaModel& eta);

}  // namespace apv::scenario
