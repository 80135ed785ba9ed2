// Command-line front end over the C API in apv/apv.h.
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apv/apv.h"

namespace {

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  std::vector<std::string> set;
  std::string param;
  std::string grid;
  bool quiet = false;
};

int fail(apv_status status) {
  std::fprintf(stderr, "error [%s]: %s\n", apv_last_error_kind(), apv_last_error());
  return status;
}

// "lo:hi:n" (inclusive, n >= 1) or "v1,v2,...".
bool parse_grid(const std::string& text, std::vector<double>& values, std::string& error) {
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<std::string> parts;
      std::stringstream ss(text);
      for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
      if (parts.size() != 3) {
        error = "expected lo:hi:n";
        return false;
      }
      const double lo = std::stod(parts[0]);
      const double hi = std::stod(parts[1]);
      const long n = std::stol(parts[2]);
      if (n < 1) {
        error = "n must be at least 1";
        return false;
      }
      for (long i = 0; i < n; ++i) values.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    } else {
      std::stringstream ss(text);
      for (std::string p; std::getline(ss, p, ',');) values.push_back(std::stod(p));
    }
  } catch (const std::exception&) {
    error = "cannot parse number in grid '" + text + "'";
    return false;
  }
  if (values.empty()) {
    error = "grid is empty";
    return false;
  }
  return true;
}

int run(const std::string& command, const Options& o) {
  apv_scenario* scenario = nullptr;
  apv_status st = o.scenario.empty() ? apv_scenario_default(&scenario) : apv_scenario_load(o.scenario.c_str(), &scenario);
  if (st != APV_OK) return fail(st);

  for (const auto& assignment : o.set) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error [Schema]: --set expects key.path=json, got '%s'\n", assignment.c_str());
      apv_scenario_free(scenario);
      return APV_ERR_SCHEMA;
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    if ((st = apv_scenario_set_json(scenario, key.c_str(), value.c_str())) != APV_OK) {
      apv_scenario_free(scenario);
      return fail(st);
    }
  }
  if (o.seed && (st = apv_scenario_set_seed(scenario, *o.seed)) != APV_OK) {
    apv_scenario_free(scenario);
    return fail(st);
  }

  int formats = APV_FORMAT_SCENARIO;
  if (o.format == "csv") formats = APV_FORMAT_CSV;
  if (o.format == "json") formats = APV_FORMAT_JSON;
  const char* out_dir = o.out.empty() ? nullptr : o.out.c_str();

  apv_result* result = nullptr;
  if (command == "shift") {
    st = apv_run_shift(scenario, out_dir, formats, &result);
  } else if (command == "ramsey") {
    st = apv_run_ramsey(scenario, out_dir, formats, &result);
  } else if (command == "montecarlo") {
    st = apv_run_montecarlo(scenario, out_dir, formats, &result);
  } else if (command == "calibrate") {
    st = apv_run_calibrate(scenario, out_dir, formats, &result);
  } else {
    std::vector<double> grid;
    std::string error;
    if (!parse_grid(o.grid, grid, error)) {
      std::fprintf(stderr, "error [Schema]: --grid: %s\n", error.c_str());
      apv_scenario_free(scenario);
      return APV_ERR_SCHEMA;
    }
    st = apv_run_sweep(scenario, o.param.c_str(), grid.data(), grid.size(), out_dir, formats, &result);
  }
  apv_scenario_free(scenario);

  if (result != nullptr) {
    if (!o.quiet) std::printf("%s\n", apv_result_summary_json(result));
    for (std::size_t i = 0; i < apv_result_file_count(result); ++i) {
      std::fprintf(stderr, "wrote %s\n", apv_result_file(result, i));
    }
    apv_result_free(result);
  }
  return st == APV_OK ? 0 : fail(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parity-violation standing-wave shift simulator"};
  app.set_version_flag("--version", apv_version());
  app.require_subcommand(1);

  Options o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario JSON file (built-in default when omitted)");
    sub->add_option("--seed", o.seed, "Override campaign.master_seed");
    sub->add_option("--out", o.out, "Output directory (else $APV_OUT_DIR, else the scenario's)");
    sub->add_option("--format", o.format, "Write only csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--set", o.set, "Override a scenario key: dotted.path=json (repeatable)");
    sub->add_flag("--quiet", o.quiet, "Do not print the JSON summary");
  };

  std::vector<std::pair<std::string, std::string>> commands = {
      {"shift", "Per-ion Larmor shift table"},
      {"ramsey", "One GHZ Ramsey scan and branch-phase fit"},
      {"montecarlo", "Phase-swap campaign over sampled systematics"},
      {"sweep", "Shifts and projected precision over a parameter grid"},
      {"calibrate", "Solve for the coupling that yields the target shift"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "sweep") {
      sub->add_option("--param", o.param, "Dotted scenario key to sweep")->required();
      sub->add_option("--grid", o.grid, "lo:hi:n or v1,v2,...")->required();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return APV_ERR_SCHEMA;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
