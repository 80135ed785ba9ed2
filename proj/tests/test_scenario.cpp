#include <doctest.h>

#include "approx.hpp"

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "apv/commands.hpp"
#include "apv/scenario.hpp"

using namespace apv;
using nlohmann::json;

namespace {

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("apv_test_" + name);
  std::filesystem::remove_all(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

scenario::Scenario small_default() {
  auto s = scenario::parse_scenario(scenario::default_document());
  s = scenario::with_override(s, "campaign.trials", 20);
  return s;
}

}  // namespace

TEST_CASE("default document parses") {
  const auto s = scenario::parse_scenario(scenario::default_document());
  CHECK(s.ion_count == 2);
  CHECK(s.eta_target_Hz.value() == testing::approx(0.4));
  CHECK(s.fields.pnc_wave.wavelength() == testing::approx(2052e-9).epsilon(1e-12));
  CHECK(s.campaign.analysis_phase_points == 32);
}

TEST_CASE("unknown keys are rejected with their path") {
  auto doc = scenario::default_document();
  doc["fields"]["pnc_wave"]["amplitude_V_per_cm"] = 1.0;
  CHECK(code_of([&] { scenario::parse_scenario(doc); }) == ErrorCode::Schema);
  CHECK(message_of([&] { scenario::parse_scenario(doc); }).find("fields.pnc_wave.amplitude_V_per_cm") !=
        std::string::npos);
}

TEST_CASE("missing keys are rejected with their path") {
  auto doc = scenario::default_document();
  doc["fields"]["pc_wave"].erase("wavelength_nm");
  CHECK(message_of([&] { scenario::parse_scenario(doc); }).find("fields.pc_wave.wavelength_nm") != std::string::npos);
  auto no_block = scenario::default_document();
  no_block.erase("systematics");
  CHECK(code_of([&] { scenario::parse_scenario(no_block); }) == ErrorCode::Schema);
}

TEST_CASE("wrong types, versions and values are schema errors") {
  auto doc = scenario::default_document();
  doc["ions"]["count"] = "two";
  CHECK(code_of([&] { scenario::parse_scenario(doc); }) == ErrorCode::Schema);
  doc = scenario::default_document();
  doc["schema_version"] = 99;
  CHECK(code_of([&] { scenario::parse_scenario(doc); }) == ErrorCode::Schema);
  doc = scenario::default_document();
  doc["systematics"]["ellipticity"] = {{"normal", {0.5, 0.1}}};
  CHECK(code_of([&] { scenario::parse_scenario(doc); }) == ErrorCode::Schema);
  doc = scenario::default_document();
  doc["fields"]["pnc_wave"]["polarization_real"] = {0, 0, 1};  // along k
  CHECK(code_of([&] { scenario::parse_scenario(doc); }) == ErrorCode::Schema);
  CHECK(code_of([] { scenario::parse_scenario_text("{ not json"); }) == ErrorCode::Schema);
  CHECK(code_of([] { scenario::load_scenario("/nonexistent/scenario.json"); }) == ErrorCode::Schema);
}

TEST_CASE("overrides address nested keys and array elements") {
  const auto base = scenario::parse_scenario(scenario::default_document());
  const auto four = scenario::with_override(base, "ions.count", 4);
  CHECK(four.ion_count == 4);
  const auto tilted = scenario::with_override(base, "systematics.misalignment_rad.1", json{{"fixed", 0.02}});
  CHECK(tilted.systematics.misalignment_rad[1].a == 0.02);
  CHECK(code_of([&] { scenario::with_override(base, "ions.cuont", 3); }) == ErrorCode::Schema);
}

TEST_CASE("shift table: 0.4 Hz alternating, oracle columns agree") {
  const auto s = small_default();
  const auto table = commands::compute_shift_table(s, scenario::resolve_eta(s));
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].budget.pnc / kTwoPi == testing::approx(0.4).epsilon(1e-9));
  CHECK(table.rows[1].budget.pnc / kTwoPi == testing::approx(-0.4).epsilon(1e-9));
  CHECK(table.max_relative_oracle_deviation < 1e-10);
}

TEST_CASE("in-phase waves give a zero pnc column and refuse calibration") {
  auto s = scenario::with_override(small_default(), "fields.pc_wave.temporal_phase_rad", kPi / 2);
  CHECK(code_of([&] { scenario::resolve_eta(s); }) == ErrorCode::ZeroShiftGeometry);
  s = scenario::with_override(s, "eta", json{{"eta_e_a0", 1e-15}});
  const auto table = commands::compute_shift_table(s, scenario::resolve_eta(s));
  for (const auto& row : table.rows) CHECK(std::abs(row.budget.pnc) < 1e-12);
}

TEST_CASE("ramsey: noiseless default gives twice the shift") {
  auto s = scenario::with_override(small_default(), "campaign.noiseless", true);
  const auto r = commands::compute_ramsey(s, scenario::resolve_eta(s));
  CHECK(std::abs(r.rate) == testing::approx(2 * r.true_delta).epsilon(1e-10));
  CHECK(r.delta_estimate == testing::approx(r.true_delta).epsilon(1e-10));
}

TEST_CASE("ramsey: zero wait is a full-contrast fringe at N times the analysis phase") {
  auto s = scenario::with_override(small_default(), "campaign.noiseless", true);
  s = scenario::with_override(s, "campaign.wait_s", 1e-12);
  const auto r = commands::compute_ramsey(s, scenario::resolve_eta(s));
  for (const auto& o : r.outcomes) {
    CHECK(std::abs(o.parity_expectation - std::cos(2 * o.analysis_phase)) < 1e-9);
  }
  CHECK(r.fit.amplitude == testing::approx(1.0).epsilon(1e-9));
}

TEST_CASE("commands write deterministic files") {
  const auto s = small_default();
  const auto a = temp_dir("det_a");
  const auto b = temp_dir("det_b");
  const auto ra = commands::run_montecarlo(s, a, {});
  const auto rb = commands::run_montecarlo(s, b, {});
  REQUIRE(ra.files.size() == 2);
  for (std::size_t i = 0; i < ra.files.size(); ++i) CHECK(slurp(ra.files[i]) == slurp(rb.files[i]));

  const auto ya = commands::run_ramsey(s, a, {});
  const auto yb = commands::run_ramsey(s, b, {});
  for (std::size_t i = 0; i < ya.files.size(); ++i) CHECK(slurp(ya.files[i]) == slurp(yb.files[i]));
}

TEST_CASE("format selection") {
  const auto dir = temp_dir("formats");
  const auto r = commands::run_shift(small_default(), dir, {true, false});
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].ends_with("shift.csv"));
  const auto header = slurp(r.files[0]).substr(0, 4);
  CHECK(header == "ion,");
}

TEST_CASE("sweep: temporal phase law and precision against N") {
  const auto s = small_default();
  const double grid[] = {0.0, kPi / 6, kPi / 2, kPi, 3 * kPi / 2};
  const auto r = commands::run_sweep(s, "fields.pnc_wave.temporal_phase_rad", grid, temp_dir("sweep_phase"), {});
  const auto& points = r.summary["points"];
  REQUIRE(points.size() == 5);
  // pnc at ion 0 follows sin(phi_pnc - phi_pc) with phi_pc = 0 in the default geometry
  for (std::size_t i = 0; i < 5; ++i) {
    const double hz = points[i]["ions"][0]["pnc_shift_Hz"].get<double>();
    CHECK(std::abs(hz - 0.4 * std::sin(grid[i])) < 1e-9 * 0.4);
  }

  const double counts[] = {1, 2, 4};
  const auto n = commands::run_sweep(s, "ions.count", counts, temp_dir("sweep_n"), {});
  const double p1 = n.summary["points"][0]["projected_fractional_precision"].get<double>();
  const double p2 = n.summary["points"][1]["projected_fractional_precision"].get<double>();
  const double p4 = n.summary["points"][2]["projected_fractional_precision"].get<double>();
  CHECK(p2 == testing::approx(p1 / 2).epsilon(1e-14));
  CHECK(p4 == testing::approx(p1 / 4).epsilon(1e-14));

  CHECK(code_of([&] { commands::run_sweep(s, "ions.count", {}, temp_dir("sweep_empty"), {}); }) == ErrorCode::Schema);
}

TEST_CASE("output directory precedence") {
  const auto s = small_default();
  CHECK(commands::output_directory(s, "explicit") == "explicit");
  setenv("APV_OUT_DIR", "from_env", 1);
  CHECK(commands::output_directory(s, "") == "from_env");
  unsetenv("APV_OUT_DIR");
  CHECK(commands::output_directory(s, "") == s.output.directory);
}
