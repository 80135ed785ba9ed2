#include "apv/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include <fmt/format.h>

namespace apv::protocol {

namespace {

using shifts::ShiftBudget;
using shifts::SystematicsInstance;
using spin::EffectiveField;

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, message);
}

}  // namespace

double Distribution::sample(rng::Engine& engine) const {
  switch (kind) {
    case Kind::Fixed: return a;
    case Kind::Uniform: return std::uniform_real_distribution<double>(a, b)(engine);
    case Kind::Normal: return b == 0.0 ? a : std::normal_distribution<double>(a, b)(engine);
  }
  return a;
}

double Distribution::nominal() const { return kind == Kind::Uniform ? 0.5 * (a + b) : a; }

double Distribution::support_min() const {
  switch (kind) {
    case Kind::Fixed: return a;
    case Kind::Uniform: return a;
    case Kind::Normal: return b == 0.0 ? a : -HUGE_VAL;
  }
  return a;
}

double Distribution::support_max() const {
  switch (kind) {
    case Kind::Fixed: return a;
    case Kind::Uniform: return b;
    case Kind::Normal: return b == 0.0 ? a : HUGE_VAL;
  }
  return a;
}

void Distribution::validate(const std::string& what) const {
  require(std::isfinite(a) && std::isfinite(b), fmt::format("{}: distribution parameters must be finite", what));
  if (kind == Kind::Uniform) require(a <= b, fmt::format("{}: uniform bounds are inverted", what));
  if (kind == Kind::Normal) require(b >= 0.0, fmt::format("{}: normal sigma must be non-negative", what));
}

void SystematicsBudget::validate() const {
  ellipticity.validate("ellipticity");
  require(ellipticity.support_min() >= 0.0 && ellipticity.support_max() <= 1.0,
          "ellipticity: support must lie within [0, 1]");
  for (std::size_t i = 0; i < misalignment_rad.size(); ++i) {
    misalignment_rad[i].validate(fmt::format("misalignment_rad[{}]", i));
  }
  B_gradient_T_per_m.validate("B_gradient_T_per_m");
  stray_common_rad_per_s.validate("stray_common_rad_per_s");
  stray_gradient_rad_per_s_per_m.validate("stray_gradient_rad_per_s_per_m");
  phase_translation_error_rad.validate("phase_translation_error_rad");
  require(std::isfinite(coupling_ratio) && coupling_ratio >= 0.0, "coupling_ratio must be finite and >= 0");
}

// Draw order is part of the reproducibility contract; do not reorder.
SystematicsInstance SystematicsBudget::sample(rng::Engine& engine) const {
  SystematicsInstance s;
  s.ellipticity = ellipticity.sample(engine);
  s.misalignment.x = misalignment_rad[0].sample(engine);
  s.misalignment.y = misalignment_rad[1].sample(engine);
  s.misalignment.z = misalignment_rad[2].sample(engine);
  s.B_gradient_T_per_m = B_gradient_T_per_m.sample(engine);
  s.stray_common_rad_per_s = stray_common_rad_per_s.sample(engine);
  s.stray_gradient_rad_per_s_per_m = stray_gradient_rad_per_s_per_m.sample(engine);
  s.phase_translation_error_rad = phase_translation_error_rad.sample(engine);
  s.coupling_ratio = coupling_ratio;
  return s;
}

SystematicsInstance SystematicsBudget::nominal() const {
  SystematicsInstance s;
  s.ellipticity = ellipticity.nominal();
  s.misalignment = {misalignment_rad[0].nominal(), misalignment_rad[1].nominal(), misalignment_rad[2].nominal()};
  s.B_gradient_T_per_m = B_gradient_T_per_m.nominal();
  s.stray_common_rad_per_s = stray_common_rad_per_s.nominal();
  s.stray_gradient_rad_per_s_per_m = stray_gradient_rad_per_s_per_m.nominal();
  s.phase_translation_error_rad = phase_translation_error_rad.nominal();
  s.coupling_ratio = coupling_ratio;
  return s;
}

void CampaignConfig::validate() const {
  require(n_ions >= 1 && n_ions <= spin::kMaxStateVectorIons, "n_ions must be in [1, 24]");
  require(trials >= 1, "trials must be at least 1");
  require(shots_per_point >= 1, "shots_per_point must be at least 1");
  require(wait_s > 0.0 && std::isfinite(wait_s), "wait time must be positive");
  require(contrast > 0.0 && contrast <= 1.0, "contrast must lie in (0, 1]");
  require(cycle_time_s > 0.0 && total_time_s > 0.0, "cycle and total time must be positive");
  require(analysis_phases.size() >= 3, "at least 3 analysis phases are required");
  require(threads >= 1, "threads must be at least 1");
  require(max_fit_failure_fraction >= 0.0 && max_fit_failure_fraction <= 1.0,
          "max_fit_failure_fraction must lie in [0, 1]");
}

std::vector<double> uniform_phase_grid(int points) {
  require(points >= 3, "analysis-phase grid needs at least 3 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) grid[j] = kTwoPi * j / points;
  return grid;
}

std::vector<geom::IonSite> place_ions(const CampaignConfig& config) {
  return geom::place_ions_on_nodes(config.fields.pc_wave, config.n_ions, config.ion_origin, config.trap_axis);
}

std::vector<EffectiveField> budget_layers(std::span<const ShiftBudget> budgets) {
  std::vector<double> pnc, zeeman, quad, stray;
  for (const auto& b : budgets) {
    pnc.push_back(b.pnc);
    zeeman.push_back(b.zeeman);
    quad.push_back(b.quad_systematic);
    stray.push_back(b.stray);
  }
  return {EffectiveField::along_z(pnc), EffectiveField::along_z(zeeman), EffectiveField::along_z(quad),
          EffectiveField::along_z(stray)};
}

spin::EffectiveField rotating_frame_layer(const geom::FieldConfiguration& fields, int n_ions) {
  return EffectiveField::uniform_z(n_ions, -phys::kGyromagneticRatio * fields.static_B.dot(fields.quantization_axis));
}

double nominal_delta(const CampaignConfig& config) {
  const auto sites = place_ions(config);
  return shifts::build_budget(config.fields, sites.front(), config.eta, SystematicsInstance{}).pnc;
}

namespace {

ConfigurationRun run_configuration(const CampaignConfig& config, const geom::FieldConfiguration& fields,
                                   std::span<const geom::IonSite> sites, const SystematicsInstance& instance,
                                   const SwapOptions& options, std::uint64_t seed) {
  ConfigurationRun run;
  for (const auto& site : sites) run.budgets.push_back(shifts::build_budget(fields, site, config.eta, instance));
  auto layers = budget_layers(run.budgets);
  const double pnc_rate = spin::relative_phase_rate(std::span(layers.data(), 1),
                                                    spin::alternating_branch(config.n_ions, false),
                                                    spin::alternating_branch(config.n_ions, true));
  layers.push_back(rotating_frame_layer(fields, config.n_ions));
  layers.insert(layers.end(), options.extra_parity_even.begin(), options.extra_parity_even.end());

  run.outcomes = spin::ramsey_scan(layers, config.wait_s, config.analysis_phases, config.shots_per_point,
                                   config.contrast, seed);
  run.fit = spin::extract_phase(run.outcomes, config.n_ions,
                                options.noiseless ? spin::ParitySource::Expectation : spin::ParitySource::Empirical);
  run.prior_phase = pnc_rate * config.wait_s;
  run.phase = run.prior_phase + spin::wrap_phase(run.fit.phase - run.prior_phase);
  run.rate = run.phase / config.wait_s;
  run.rate_sigma = run.fit.sigma / config.wait_s;
  return run;
}

}  // namespace

ConfigurationRun run_single_configuration(const CampaignConfig& config, const SystematicsInstance& instance,
                                          const SwapOptions& options) {
  config.validate();
  const auto sites = place_ions(config);
  return run_configuration(config, config.fields, sites, instance, options, options.seed);
}

PhaseSwapResult run_phase_swap_pair(const CampaignConfig& config, const SystematicsInstance& instance,
                                    const SwapOptions& options) {
  config.validate();
  require(config.n_ions % 2 == 0, "the phase-swap protocol needs an even number of ions");
  const auto sites = place_ions(config);

  geom::FieldConfiguration swapped = config.fields;
  swapped.pnc_wave = geom::translate_phase(config.fields.pnc_wave, kPi + instance.phase_translation_error_rad);

  PhaseSwapResult r;
  r.nominal = run_configuration(config, config.fields, sites, instance, options, rng::derive_seed(options.seed, 0));
  r.swapped = run_configuration(config, swapped, sites, instance, options, rng::derive_seed(options.seed, 1));

  const double factor = spin::signal_factor(config.n_ions);
  r.delta_estimate = 0.5 * (r.nominal.rate - r.swapped.rate) / factor;
  r.residual_systematic = 0.5 * (r.nominal.rate + r.swapped.rate);
  r.sigma = 0.5 * std::hypot(r.nominal.rate_sigma, r.swapped.rate_sigma) / std::abs(factor);
  return r;
}

namespace {

TrialRecord run_trial(const CampaignConfig& config, const SystematicsBudget& budget, int index) {
  const std::uint64_t root = rng::derive_seed(config.master_seed, static_cast<std::uint64_t>(index));
  auto engine = rng::make_engine(rng::derive_seed(root, 0));

  TrialRecord t;
  t.index = index;
  t.systematics = budget.sample(engine);
  try {
    const auto noisy = run_phase_swap_pair(config, t.systematics, SwapOptions{false, rng::derive_seed(root, 1), {}});
    const auto ideal = run_phase_swap_pair(config, t.systematics, SwapOptions{true, rng::derive_seed(root, 2), {}});
    t.estimate = noisy.delta_estimate;
    t.estimate_sigma = noisy.sigma;
    t.noiseless_estimate = ideal.delta_estimate;
    t.expected_sigma = ideal.sigma;
    t.residual_systematic = noisy.residual_systematic;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FitDegenerate) throw;
    t.fit_failed = true;
    t.failure = e.what();
  }
  return t;
}

}  // namespace

PrecisionReport run_montecarlo(const CampaignConfig& config, const SystematicsBudget& budget) {
  config.validate();
  budget.validate();
  require(config.n_ions % 2 == 0, "the phase-swap protocol needs an even number of ions");

  PrecisionReport report;
  report.n_ions = config.n_ions;
  report.trials = config.trials;
  report.master_seed = config.master_seed;
  report.true_delta = nominal_delta(config);
  report.per_trial.resize(static_cast<std::size_t>(config.trials));

  const int workers = std::min(config.threads, config.trials);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int k = w; k < config.trials; k += workers) report.per_trial[k] = run_trial(config, budget, k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  double sum = 0.0, sum_bias = 0.0, sum_var = 0.0;
  int ok = 0;
  for (const auto& t : report.per_trial) {
    if (t.fit_failed) {
      ++report.fit_failures;
      continue;
    }
    ++ok;
    sum += t.estimate;
    sum_bias += t.noiseless_estimate - report.true_delta;
    sum_var += t.expected_sigma * t.expected_sigma;
  }
  report.fit_failure_fraction = static_cast<double>(report.fit_failures) / config.trials;
  report.fit_failures_exceed_threshold = report.fit_failure_fraction > config.max_fit_failure_fraction;
  if (ok == 0) return report;

  report.delta_pnc_estimate = sum / ok;
  report.systematic_bias = sum_bias / ok;
  report.statistical_sigma = std::sqrt(sum_var / ok);
  if (ok > 1) {
    double ss = 0.0;
    for (const auto& t : report.per_trial) {
      if (!t.fit_failed) ss += (t.estimate - report.delta_pnc_estimate) * (t.estimate - report.delta_pnc_estimate);
    }
    report.empirical_spread = std::sqrt(ss / (ok - 1));
  }
  report.fractional_precision =
      std::hypot(report.statistical_sigma, report.systematic_bias) / std::abs(report.true_delta);
  if (report.fractional_precision > 0.0) report.reach_TeV = bsm_reach(report.fractional_precision);
  return report;
}

double precision_projection(int n_ions, double delta, double contrast, double cycle_time_s, double total_time_s) {
  require(n_ions >= 1, "n_ions must be positive");
  require(delta != 0.0 && std::isfinite(delta), "delta must be nonzero");
  require(contrast > 0.0 && cycle_time_s > 0.0 && total_time_s > 0.0,
          "contrast, cycle time and total time must be positive");
  const double cycles = total_time_s / cycle_time_s;
  const double sigma = 1.0 / (contrast * std::abs(spin::signal_factor(n_ions)) * cycle_time_s * std::sqrt(cycles));
  return sigma / std::abs(delta);
}

BranchPrecisionTarget branch_precision_target(int n_ions, double delta_Hz, double contrast, double cycle_time_s,
                                              double branch_precision_Hz) {
  require(n_ions >= 1 && delta_Hz != 0.0 && contrast > 0.0 && cycle_time_s > 0.0 && branch_precision_Hz > 0.0,
          "branch precision target needs positive inputs");
  BranchPrecisionTarget t;
  t.n_ions = n_ions;
  t.delta_Hz = delta_Hz;
  t.branch_precision_Hz = branch_precision_Hz;
  // sigma_rate = 1 / (C tau sqrt(T / tau))  ->  T = tau / (C tau sigma_rate)^2
  const double sigma_rate = kTwoPi * branch_precision_Hz;
  const double per_cycle = contrast * cycle_time_s * sigma_rate;
  t.total_time_s = cycle_time_s / (per_cycle * per_cycle);
  t.computed_factor = std::abs(spin::signal_factor(n_ions));
  t.stated_factor = 2.0 * n_ions;
  t.fractional_computed = branch_precision_Hz / (t.computed_factor * std::abs(delta_Hz));
  t.fractional_stated = branch_precision_Hz / (t.stated_factor * std::abs(delta_Hz));
  return t;
}

std::vector<IsotopeRatio> isotope_ratio(std::span<const IsotopeMeasurement> measurements, double theory_fraction) {
  require(measurements.size() >= 2, "isotope ratios need at least two measurements");
  require(theory_fraction >= 0.0 && std::isfinite(theory_fraction), "theory fraction must be >= 0");
  for (const auto& m : measurements) {
    require(m.sigma >= 0.0 && std::isfinite(m.sigma) && std::isfinite(m.delta),
            fmt::format("isotope {}: delta and sigma must be finite, sigma >= 0", m.label));
    if (std::abs(m.delta) < 1e-15) {
      throw Error(ErrorCode::ZeroDenominator, fmt::format("isotope {}: |delta| below 1e-15 rad/s", m.label));
    }
  }
  std::vector<IsotopeRatio> out;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    for (std::size_t j = i + 1; j < measurements.size(); ++j) {
      const auto& num = measurements[i];
      const auto& den = measurements[j];
      IsotopeRatio r;
      r.numerator = num.label;
      r.denominator = den.label;
      r.ratio = num.delta / den.delta;
      r.sigma_experimental = std::abs(r.ratio) * std::hypot(num.sigma / num.delta, den.sigma / den.delta);
      r.sigma_theory = theory_fraction * std::abs(r.ratio);
      r.sigma_total = std::hypot(r.sigma_experimental, r.sigma_theory);
      out.push_back(r);
    }
  }
  return out;
}

double bsm_reach(double fractional_precision) {
  require(fractional_precision > 0.0 && std::isfinite(fractional_precision), "fractional precision must be positive");
  return kReachAnchorTeV * std::sqrt(kReachAnchorPrecision / fractional_precision);
}

}  // namespace apv::protocol
