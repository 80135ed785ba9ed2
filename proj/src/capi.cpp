#include "apv/apv.h"

#include <exception>
#include <memory>
#include <string>
#include <vector>

#include "apv/commands.hpp"
#include "apv/protocol.hpp"
#include "apv/scenario.hpp"

struct apv_scenario {
  apv::scenario::Scenario value;
};

struct apv_result {
  std::string summary;
  std::vector<std::string> files;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_kind;

apv_status status_for(apv::ErrorCode code) {
  using apv::ErrorCode;
  switch (code) {
    case ErrorCode::Schema:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionTooLarge:
      return APV_ERR_SCHEMA;
    case ErrorCode::FrequencyMismatch:
    case ErrorCode::ZeroShiftGeometry:
    case ErrorCode::DegenerateSegment:
    case ErrorCode::NonDiagonalField:
    case ErrorCode::ZeroDenominator:
      return APV_ERR_PHYSICS;
    case ErrorCode::FitDegenerate:
      return APV_ERR_FIT;
    case ErrorCode::Io:
      break;
  }
  return APV_ERR_INTERNAL;
}

template <class F>
apv_status guarded(F&& f) {
  g_error.clear();
  g_error_kind.clear();
  try {
    return f();
  } catch (const apv::Error& e) {
    g_error = e.what();
    g_error_kind = apv::to_string(e.code());
    return status_for(e.code());
  } catch (const std::exception& e) {
    g_error = e.what();
    g_error_kind = "Internal";
  } catch (...) {
    g_error = "unknown error";
    g_error_kind = "Internal";
  }
  return APV_ERR_INTERNAL;
}

apv_status missing(const char* what) {
  g_error = std::string(what) + " must not be NULL";
  g_error_kind = "InvalidArgument";
  return APV_ERR_SCHEMA;
}

apv::commands::Formats formats_for(const apv::scenario::Scenario& s, int formats) {
  if (formats == APV_FORMAT_SCENARIO) return {s.output.csv, s.output.json};
  return {(formats & APV_FORMAT_CSV) != 0, (formats & APV_FORMAT_JSON) != 0};
}

apv_status finish(const apv::commands::CommandResult& r, apv_result** out) {
  auto result = std::make_unique<apv_result>();
  result->summary = r.summary.dump(2);
  result->files = r.files;
  *out = result.release();
  return r.fit_failures_exceeded ? APV_ERR_FIT_FAILURES : APV_OK;
}

template <class Run>
apv_status run_command(const apv_scenario* scenario, const char* out_dir, int formats, apv_result** out, Run run) {
  if (scenario == nullptr) return missing("scenario");
  if (out == nullptr) return missing("out");
  *out = nullptr;
  return guarded([&] {
    const auto& s = scenario->value;
    const std::string dir = apv::commands::output_directory(s, out_dir ? out_dir : "");
    const apv_status st = finish(run(s, dir, formats_for(s, formats)), out);
    if (st == APV_ERR_FIT_FAILURES) {
      g_error = "fraction of failed fits exceeds campaign.max_fit_failure_fraction";
      g_error_kind = "FitFailures";
    }
    return st;
  });
}

apv_status make_scenario(apv::scenario::Scenario s, apv_scenario** out) {
  *out = new apv_scenario{std::move(s)};
  return APV_OK;
}

}  // namespace

extern "C" {

const char* apv_version(void) { return "1.0.0"; }

const char* apv_last_error(void) { return g_error.c_str(); }

const char* apv_last_error_kind(void) { return g_error_kind.c_str(); }

apv_status apv_scenario_load(const char* path, apv_scenario** out) {
  if (path == nullptr) return missing("path");
  if (out == nullptr) return missing("out");
  *out = nullptr;
  return guarded([&] { return make_scenario(apv::scenario::load_scenario(path), out); });
}

apv_status apv_scenario_parse(const char* json_text, apv_scenario** out) {
  if (json_text == nullptr) return missing("json_text");
  if (out == nullptr) return missing("out");
  *out = nullptr;
  return guarded([&] { return make_scenario(apv::scenario::parse_scenario_text(json_text), out); });
}

apv_status apv_scenario_default(apv_scenario** out) {
  if (out == nullptr) return missing("out");
  *out = nullptr;
  return guarded([&] { return make_scenario(apv::scenario::parse_scenario(apv::scenario::default_document()), out); });
}

apv_status apv_scenario_set_json(apv_scenario* scenario, const char* path, const char* json_value) {
  if (scenario == nullptr) return missing("scenario");
  if (path == nullptr) return missing("path");
  if (json_value == nullptr) return missing("json_value");
  return guarded([&] {
    const auto value = nlohmann::json::parse(json_value, nullptr, false);
    if (value.is_discarded()) {
      throw apv::Error(apv::ErrorCode::Schema, std::string(path) + ": value is not valid JSON");
    }
    scenario->value = apv::scenario::with_override(scenario->value, path, value);
    return APV_OK;
  });
}

apv_status apv_scenario_set_seed(apv_scenario* scenario, uint64_t seed) {
  if (scenario == nullptr) return missing("scenario");
  return guarded([&] {
    scenario->value = apv::scenario::with_override(scenario->value, "campaign.master_seed", seed);
    return APV_OK;
  });
}

void apv_scenario_free(apv_scenario* scenario) { delete scenario; }

apv_status apv_run_shift(const apv_scenario* scenario, const char* out_dir, int formats, apv_result** out) {
  return run_command(scenario, out_dir, formats, out, apv::commands::run_shift);
}

apv_status apv_run_ramsey(const apv_scenario* scenario, const char* out_dir, int formats, apv_result** out) {
  return run_command(scenario, out_dir, formats, out, apv::commands::run_ramsey);
}

apv_status apv_run_montecarlo(const apv_scenario* scenario, const char* out_dir, int formats, apv_result** out) {
  return run_command(scenario, out_dir, formats, out, apv::commands::run_montecarlo);
}

apv_status apv_run_sweep(const apv_scenario* scenario, const char* path, const double* values, size_t count,
                         const char* out_dir, int formats, apv_result** out) {
  if (path == nullptr) return missing("path");
  if (values == nullptr && count > 0) return missing("values");
  const std::span<const double> grid(values, count);
  return run_command(scenario, out_dir, formats, out,
                     [&](const apv::scenario::Scenario& s, const std::string& dir, apv::commands::Formats f) {
                       return apv::commands::run_sweep(s, path, grid, dir, f);
                     });
}

apv_status apv_run_calibrate(const apv_scenario* scenario, const char* out_dir, int formats, apv_result** out) {
  return run_command(scenario, out_dir, formats, out, apv::commands::run_calibrate);
}

const char* apv_result_summary_json(const apv_result* result) { return result ? result->summary.c_str() : ""; }

size_t apv_result_file_count(const apv_result* result) { return result ? result->files.size() : 0; }

const char* apv_result_file(const apv_result* result, size_t index) {
  if (result == nullptr || index >= result->files.size()) return nullptr;
  return result->files[index].c_str();
}

void apv_result_free(apv_result* result) { delete result; }

double apv_bsm_reach(double fractional_precision) {
  double v = 0.0;
  guarded([&] {
    v = apv::protocol::bsm_reach(fractional_precision);
    return APV_OK;
  });
  return v;
}

apv_status apv_precision_projection(int n_ions, double delta, double contrast, double cycle_time_s,
                                    double total_time_s, double* out) {
  if (out == nullptr) return missing("out");
  return guarded([&] {
    *out = apv::protocol::precision_projection(n_ions, delta, contrast, cycle_time_s, total_time_s);
    return APV_OK;
  });
}

apv_status apv_isotope_ratio(double delta_a, double sigma_a, double delta_b, double sigma_b, double theory_fraction,
                             double* ratio, double* sigma_total) {
  if (ratio == nullptr) return missing("ratio");
  if (sigma_total == nullptr) return missing("sigma_total");
  return guarded([&] {
    const apv::protocol::IsotopeMeasurement m[2] = {{"a", delta_a, sigma_a}, {"b", delta_b, sigma_b}};
    const auto r = apv::protocol::isotope_ratio(m, theory_fraction).front();
    *ratio = r.ratio;
    *sigma_total = r.sigma_total;
    return APV_OK;
  });
}

}  // extern "C"
