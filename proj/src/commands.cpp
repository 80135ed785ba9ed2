#include "apv/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <fmt/format.h>

namespace apv::commands {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kHz = 1.0 / kTwoPi;

std::string num(double v) { return fmt::format("{:.17g}", v); }

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, fmt::format("cannot create output directory {}: {}", dir, ec.message()));
  }

  void write(const std::string& name, const std::string& content, CommandResult& result) const {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write {}", path.string()));
    result.files.push_back(path.string());
  }

  void write_json(const std::string& name, const json& j, CommandResult& result) const {
    write(name, j.dump(2) + "\n", result);
  }

 private:
  fs::path dir_;
};

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json eta_json(const shifts::EtaModel& eta) {
  return {{"eta_e_a0", eta.eta_e_a0}, {"omega_over_rabi", eta.omega_over_rabi}};
}

json systematics_json(const shifts::SystematicsInstance& s) {
  return {{"ellipticity", s.ellipticity},
          {"misalignment_rad", json::array({s.misalignment.x, s.misalignment.y, s.misalignment.z})},
          {"B_gradient_T_per_m", s.B_gradient_T_per_m},
          {"stray_common_rad_per_s", s.stray_common_rad_per_s},
          {"stray_gradient_rad_per_s_per_m", s.stray_gradient_rad_per_s_per_m},
          {"phase_translation_error_rad", s.phase_translation_error_rad},
          {"coupling_ratio", s.coupling_ratio}};
}

json fit_json(const spin::PhaseFit& f) {
  return {{"phase_rad", f.phase}, {"sigma_rad", f.sigma}, {"amplitude", f.amplitude},
          {"amplitude_sigma", f.amplitude_sigma}};
}

double relative_deviation(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

}  // namespace

std::string output_directory(const scenario::Scenario& s, const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("APV_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return s.output.directory;
}

ShiftTable compute_shift_table(const scenario::Scenario& s, const shifts::EtaModel& eta, int numeric_samples) {
  ShiftTable table;
  table.eta = eta;
  const auto nominal = s.systematics.nominal();
  const double floor = 1e-12 * shifts::shift_scale(s.fields, eta);
  for (const auto& site : scenario::ion_sites(s)) {
    ShiftRow row;
    row.site = site;
    row.budget = shifts::build_budget(s.fields, site, eta, nominal);
    row.pnc_vector = shifts::pnc_shift_vector(s.fields, site.position, eta);
    row.pnc_numeric = shifts::larmor_shift(shifts::pnc_shift_numeric(s.fields, site.position, eta, numeric_samples),
                                           s.fields.quantization_axis);
    table.max_relative_oracle_deviation =
        std::max(table.max_relative_oracle_deviation, relative_deviation(row.budget.pnc, row.pnc_numeric, floor));
    table.rows.push_back(row);
  }
  return table;
}

RamseyRun compute_ramsey(const scenario::Scenario& s, const shifts::EtaModel& eta) {
  const auto config = scenario::campaign_config(s, eta);
  const auto run = protocol::run_single_configuration(
      config, s.systematics.nominal(), protocol::SwapOptions{s.campaign.noiseless, s.campaign.master_seed, {}});
  RamseyRun r;
  r.budgets = run.budgets;
  r.outcomes = run.outcomes;
  r.fit = run.fit;
  r.prior_phase = run.prior_phase;
  r.phase = run.phase;
  r.rate = run.rate;
  r.rate_sigma = run.rate_sigma;
  r.signal_factor = spin::signal_factor(s.ion_count);
  r.delta_estimate = run.rate / r.signal_factor;
  r.true_delta = protocol::nominal_delta(config);
  return r;
}

CommandResult run_shift(const scenario::Scenario& s, const std::string& out_dir, Formats formats) {
  const auto eta = scenario::resolve_eta(s);
  const auto table = compute_shift_table(s, eta);
  const OutputDir out(out_dir);
  CommandResult result;

  json rows = json::array();
  std::string csv =
      "ion,x_m,y_m,z_m,node_parity,pnc_rad_per_s,pnc_Hz,pnc_numeric_rad_per_s,zeeman_rad_per_s,"
      "quad_systematic_rad_per_s,stray_rad_per_s,total_rad_per_s,pnc_vector_x,pnc_vector_y,pnc_vector_z\n";
  for (const auto& row : table.rows) {
    const auto& b = row.budget;
    const auto& p = row.site.position;
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", row.site.index, num(p.x()), num(p.y()),
                       num(p.z()), row.site.node_parity, num(b.pnc), num(b.pnc * kHz), num(row.pnc_numeric),
                       num(b.zeeman), num(b.quad_systematic), num(b.stray), num(b.total()), num(row.pnc_vector.x()),
                       num(row.pnc_vector.y()), num(row.pnc_vector.z()));
    rows.push_back({{"ion", row.site.index},
                    {"position_m", vec_json(p)},
                    {"node_parity", row.site.node_parity},
                    {"pnc_rad_per_s", b.pnc},
                    {"pnc_Hz", b.pnc * kHz},
                    {"pnc_numeric_rad_per_s", row.pnc_numeric},
                    {"zeeman_rad_per_s", b.zeeman},
                    {"quad_systematic_rad_per_s", b.quad_systematic},
                    {"stray_rad_per_s", b.stray},
                    {"total_rad_per_s", b.total()},
                    {"pnc_vector_rad_per_s", vec_json(row.pnc_vector)}});
  }

  result.summary = {{"command", "shift"},
                    {"ion_count", s.ion_count},
                    {"eta", eta_json(eta)},
                    {"delta_pnc_Hz", table.rows.front().budget.pnc * kHz},
                    {"signal_factor", spin::signal_factor(s.ion_count)},
                    {"max_relative_oracle_deviation", table.max_relative_oracle_deviation},
                    {"ions", rows}};
  if (formats.csv) out.write("shift.csv", csv, result);
  if (formats.json) out.write_json("shift.json", result.summary, result);
  return result;
}

CommandResult run_ramsey(const scenario::Scenario& s, const std::string& out_dir, Formats formats) {
  const auto eta = scenario::resolve_eta(s);
  const auto r = compute_ramsey(s, eta);
  const OutputDir out(out_dir);
  CommandResult result;

  std::string csv = "analysis_phase_rad,parity_expectation,even,odd,empirical_parity\n";
  for (const auto& o : r.outcomes) {
    csv += fmt::format("{},{},{},{},{}\n", num(o.analysis_phase), num(o.parity_expectation), o.even, o.odd,
                       num(o.empirical_parity()));
  }

  result.summary = {{"command", "ramsey"},
                    {"ion_count", s.ion_count},
                    {"seed", s.campaign.master_seed},
                    {"noiseless", s.campaign.noiseless},
                    {"wait_s", s.campaign.wait_s},
                    {"shots_per_point", s.campaign.shots_per_point},
                    {"eta", eta_json(eta)},
                    {"systematics", systematics_json(s.systematics.nominal())},
                    {"fit", fit_json(r.fit)},
                    {"prior_phase_rad", r.prior_phase},
                    {"branch_phase_rad", r.phase},
                    {"branch_rate_rad_per_s", r.rate},
                    {"branch_rate_sigma_rad_per_s", r.rate_sigma},
                    {"signal_factor", r.signal_factor},
                    {"delta_estimate_rad_per_s", r.delta_estimate},
                    {"delta_estimate_Hz", r.delta_estimate * kHz},
                    {"true_delta_rad_per_s", r.true_delta},
                    {"true_delta_Hz", r.true_delta * kHz}};
  if (formats.csv) out.write("ramsey_fringe.csv", csv, result);
  if (formats.json) out.write_json("ramsey_fit.json", result.summary, result);
  return result;
}

CommandResult run_montecarlo(const scenario::Scenario& s, const std::string& out_dir, Formats formats) {
  const auto eta = scenario::resolve_eta(s);
  const auto config = scenario::campaign_config(s, eta);
  const auto report = protocol::run_montecarlo(config, s.systematics);
  const OutputDir out(out_dir);
  CommandResult result;
  result.fit_failures_exceeded = report.fit_failures_exceed_threshold;

  std::string csv =
      "trial,fit_failed,estimate_rad_per_s,estimate_sigma_rad_per_s,noiseless_estimate_rad_per_s,"
      "expected_sigma_rad_per_s,residual_systematic_rad_per_s,ellipticity,misalignment_x_rad,misalignment_y_rad,"
      "misalignment_z_rad,B_gradient_T_per_m,stray_common_rad_per_s,stray_gradient_rad_per_s_per_m,"
      "phase_translation_error_rad\n";
  for (const auto& t : report.per_trial) {
    const auto& y = t.systematics;
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", t.index, t.fit_failed ? 1 : 0,
                       num(t.estimate), num(t.estimate_sigma), num(t.noiseless_estimate), num(t.expected_sigma),
                       num(t.residual_systematic), num(y.ellipticity), num(y.misalignment.x), num(y.misalignment.y),
                       num(y.misalignment.z), num(y.B_gradient_T_per_m), num(y.stray_common_rad_per_s),
                       num(y.stray_gradient_rad_per_s_per_m), num(y.phase_translation_error_rad));
  }

  const double projection = protocol::precision_projection(s.ion_count, report.true_delta, s.campaign.contrast,
                                                           s.campaign.cycle_time_s, s.campaign.total_time_s);
  result.summary = {
      {"command", "montecarlo"},
      {"ion_count", report.n_ions},
      {"trials", report.trials},
      {"master_seed", report.master_seed},
      {"eta", eta_json(eta)},
      {"true_delta_rad_per_s", report.true_delta},
      {"true_delta_Hz", report.true_delta * kHz},
      {"delta_pnc_estimate_rad_per_s", report.delta_pnc_estimate},
      {"statistical_sigma_rad_per_s", report.statistical_sigma},
      {"empirical_spread_rad_per_s", report.empirical_spread},
      {"systematic_bias_rad_per_s", report.systematic_bias},
      {"fractional_precision", report.fractional_precision},
      {"reach_TeV", report.reach_TeV},
      {"projected_fractional_precision", projection},
      {"projected_reach_TeV", protocol::bsm_reach(projection)},
      {"fit_failures", report.fit_failures},
      {"fit_failure_fraction", report.fit_failure_fraction},
      {"max_fit_failure_fraction", s.campaign.max_fit_failure_fraction},
      {"fit_failures_exceed_threshold", report.fit_failures_exceed_threshold},
      {"campaign",
       {{"wait_s", s.campaign.wait_s},
        {"shots_per_point", s.campaign.shots_per_point},
        {"analysis_phase_points", s.campaign.analysis_phase_points},
        {"contrast", s.campaign.contrast},
        {"cycle_time_s", s.campaign.cycle_time_s},
        {"total_time_s", s.campaign.total_time_s}}},
      {"note",
       "statistical_sigma is the RMS fit standard error of one phase-swap pair at the noiseless parities; "
       "projected_fractional_precision scales the single-cycle limit to total_time_s"}};
  if (formats.csv) out.write("montecarlo_trials.csv", csv, result);
  if (formats.json) out.write_json("montecarlo_report.json", result.summary, result);
  return result;
}

CommandResult run_sweep(const scenario::Scenario& s, std::string_view path, std::span<const double> grid,
                        const std::string& out_dir, Formats formats) {
  if (grid.empty()) throw Error(ErrorCode::Schema, "sweep grid is empty");
  const auto eta = scenario::resolve_eta(s);
  const OutputDir out(out_dir);
  CommandResult result;

  std::string csv = "parameter,value,quantity,ion,result\n";
  json points = json::array();
  for (const double value : grid) {
    const json v = (std::nearbyint(value) == value && std::abs(value) < 9e15) ? json(static_cast<std::int64_t>(value))
                                                                              : json(value);
    const auto point = scenario::with_override(s, path, v);
    const auto nominal = point.systematics.nominal();
    const auto sites = scenario::ion_sites(point);

    json ions = json::array();
    for (const auto& site : sites) {
      const auto b = shifts::build_budget(point.fields, site, eta, nominal);
      csv += fmt::format("{},{},pnc_shift_Hz,{},{}\n", path, num(value), site.index, num(b.pnc * kHz));
      csv += fmt::format("{},{},parity_even_shift_Hz,{},{}\n", path, num(value), site.index,
                         num(b.parity_even() * kHz));
      ions.push_back({{"ion", site.index}, {"pnc_shift_Hz", b.pnc * kHz}, {"parity_even_shift_Hz", b.parity_even() * kHz}});
    }
    const double delta = shifts::build_budget(point.fields, sites.front(), eta, nominal).pnc;
    const double factor = spin::signal_factor(point.ion_count);
    json projection = nullptr;
    if (delta != 0.0) {
      const double p = protocol::precision_projection(point.ion_count, delta, point.campaign.contrast,
                                                      point.campaign.cycle_time_s, point.campaign.total_time_s);
      csv += fmt::format("{},{},projected_fractional_precision,,{}\n", path, num(value), num(p));
      projection = p;
    }
    csv += fmt::format("{},{},signal_factor,,{}\n", path, num(value), num(factor));
    points.push_back({{"value", value},
                      {"ions", ions},
                      {"signal_factor", factor},
                      {"projected_fractional_precision", projection}});
  }

  result.summary = {{"command", "sweep"}, {"parameter", std::string(path)}, {"eta", eta_json(eta)}, {"points", points}};
  if (formats.csv) out.write("sweep.csv", csv, result);
  if (formats.json) out.write_json("sweep.json", result.summary, result);
  return result;
}

CommandResult run_calibrate(const scenario::Scenario& s, const std::string& out_dir, Formats formats) {
  const auto eta = scenario::resolve_eta(s);
  const auto sites = scenario::ion_sites(s);
  const double achieved = shifts::larmor_shift(shifts::pnc_shift_vector(s.fields, sites.front().position, eta),
                                               s.fields.quantization_axis);
  const OutputDir out(out_dir);
  CommandResult result;

  result.summary = {{"command", "calibrate"},
                    {"eta", eta_json(eta)},
                    {"coupling", eta.coupling(s.fields.pc_wave)},
                    {"target_shift_Hz", s.eta_target_Hz ? json(*s.eta_target_Hz) : json(nullptr)},
                    {"achieved_shift_Hz", achieved * kHz},
                    {"shift_scale_Hz", shifts::shift_scale(s.fields, eta) * kHz},
                    {"reference_ion_position_m", vec_json(sites.front().position)}};
  if (formats.csv) {
    out.write("calibration.csv",
              fmt::format("eta_e_a0,omega_over_rabi,coupling,achieved_shift_Hz\n{},{},{},{}\n", num(eta.eta_e_a0),
                          num(eta.omega_over_rabi), num(eta.coupling(s.fields.pc_wave)), num(achieved * kHz)),
              result);
  }
  if (formats.json) out.write_json("calibration.json", result.summary, result);
  return result;
}

}  // namespace apv::commands
