#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "apv/field_geometry.hpp"
#include "apv/rng.hpp"
#include "apv/shifts.hpp"
#include "apv/spin_sim.hpp"

namespace apv::protocol {

struct Distribution {
  enum class Kind { Fixed, Uniform, Normal };
  Kind kind = Kind::Fixed;
  double a = 0.0;  // value | low  | mean
  double b = 0.0;  //       | high | sigma

  static Distribution fixed(double value) { return {Kind::Fixed, value, 0.0}; }
  static Distribution uniform(double low, double high) { return {Kind::Uniform, low, high}; }
  static Distribution normal(double mean, double sigma) { return {Kind::Normal, mean, sigma}; }

  /// Fixed distributions draw nothing from the engine.
  double sample(rng::Engine& engine) const;
  double nominal() const;
  double support_min() const;
  double support_max() const;
  /// Throws InvalidArgument naming `what` on non-finite or inverted parameters.
  void validate(const std::string& what) const;
};

/// Distributions for every parity-even knob the protocol has to reject.
struct SystematicsBudget {
  Distribution ellipticity;
  std::array<Distribution, 3> misalignment_rad;
  Distribution B_gradient_T_per_m;
  Distribution stray_common_rad_per_s;
  Distribution stray_gradient_rad_per_s_per_m;
  Distribution phase_translation_error_rad;
  double coupling_ratio = 1e7;

  /// Ellipticity support must lie in [0, 1]; normal ellipticity is rejected.
  void validate() const;
  shifts::SystematicsInstance sample(rng::Engine& engine) const;
  shifts::SystematicsInstance nominal() const;
};

struct CampaignConfig {
  int n_ions = 2;
  geom::FieldConfiguration fields = geom::default_configuration();
  shifts::EtaModel eta;
  Vec3 ion_origin = Vec3::Zero();
  Vec3 trap_axis = Vec3::UnitX();
  double wait_s = 1.0;
  std::uint64_t shots_per_point = 5000;
  std::vector<double> analysis_phases;
  int trials = 1000;
  std::uint64_t master_seed = 1;
  double contrast = 1.0;
  double cycle_time_s = 1.0;
  double total_time_s = 3600.0;
  double max_fit_failure_fraction = 0.01;
  int threads = 1;

  void validate() const;
};

/// `points` equally spaced analysis phases on [0, 2pi).
std::vector<double> uniform_phase_grid(int points);

std::vector<geom::IonSite> place_ions(const CampaignConfig& config);

/// Per-ion budgets as separate evolution layers: pnc, zeeman, quad, stray.
std::vector<spin::EffectiveField> budget_layers(std::span<const shifts::ShiftBudget> budgets);

/// Uniform layer -gamma (B . axis): Ramsey analysis pulses are referenced to the
/// bare Larmor frequency of the static field, so evolution is simulated in that
/// rotating frame.
spin::EffectiveField rotating_frame_layer(const geom::FieldConfiguration& fields, int n_ions);

/// Larmor PNC shift of ion 0 in the nominal geometry without systematics.
double nominal_delta(const CampaignConfig& config);

struct ConfigurationRun {
  std::vector<shifts::ShiftBudget> budgets;
  std::vector<spin::RamseyOutcome> outcomes;
  spin::PhaseFit fit;
  double prior_phase = 0.0;  // expected PNC-only branch phase, used to unwrap
  double phase = 0.0;        // unwrapped fitted branch phase
  double rate = 0.0;         // rad/s
  double rate_sigma = 0.0;
};

struct PhaseSwapResult {
  double delta_estimate = 0.0;        // rad/s
  double residual_systematic = 0.0;   // branch-rate units, rad/s
  double sigma = 0.0;                 // rad/s on delta_estimate
  ConfigurationRun nominal;
  ConfigurationRun swapped;
};

struct SwapOptions {
  bool noiseless = false;
  std::uint64_t seed = 0;
  /// Additional parity-even layers applied identically in both configurations.
  std::span<const spin::EffectiveField> extra_parity_even = {};
};

/// One Ramsey scan in the nominal geometry (any ion count). The branch phase is
/// unwrapped around the PNC-only expectation. Readout noise uses options.seed.
ConfigurationRun run_single_configuration(const CampaignConfig& config, const shifts::SystematicsInstance& instance,
                                          const SwapOptions& options = {});

/// Ramsey estimate in the nominal geometry and again with E_PNC translated by
/// pi + instance.phase_translation_error_rad. The estimate is half the
/// difference of the two branch rates divided by spin::signal_factor(N); the
/// residual is half their sum. Requires an even ion count, and the fitted phase
/// must lie within pi of the PNC-only expectation to be unwrapped correctly.
PhaseSwapResult run_phase_swap_pair(const CampaignConfig& config, const shifts::SystematicsInstance& instance,
                                    const SwapOptions& options = {});

struct TrialRecord {
  int index = 0;
  shifts::SystematicsInstance systematics;
  bool fit_failed = false;
  std::string failure;
  double estimate = 0.0;            // with projection noise
  double estimate_sigma = 0.0;      // fit standard error of the noisy run
  double noiseless_estimate = 0.0;  // systematics only
  double expected_sigma = 0.0;      // fit standard error at the noiseless parities
  double residual_systematic = 0.0;
};

struct PrecisionReport {
  int n_ions = 0;
  int trials = 0;
  std::uint64_t master_seed = 0;
  double true_delta = 0.0;
  double delta_pnc_estimate = 0.0;
  double statistical_sigma = 0.0;  // RMS expected fit standard error
  double empirical_spread = 0.0;   // sample std of noisy estimates
  double systematic_bias = 0.0;    // mean noiseless error
  double fractional_precision = 0.0;
  double reach_TeV = 0.0;
  int fit_failures = 0;
  double fit_failure_fraction = 0.0;
  bool fit_failures_exceed_threshold = false;
  std::vector<TrialRecord> per_trial;
};

/// Trials run on `config.threads` workers; results are merged in trial order so
/// the report does not depend on scheduling. Trial k uses
/// rng::derive_seed(master_seed, k) as its root seed.
PrecisionReport run_montecarlo(const CampaignConfig& config, const SystematicsBudget& budget);

/// sigma_D / |D| for quantum projection noise,
/// sigma_D = 1 / (contrast * |signal_factor(N)| * cycle * sqrt(total / cycle)).
double precision_projection(int n_ions, double delta, double contrast, double cycle_time_s, double total_time_s);

/// Integration time needed to reach `branch_precision_Hz` on the branch-phase
/// frequency, and the fractional precision on D it implies both with the
/// simulated branch factor |signal_factor(N)| and with a 2N factor.
struct BranchPrecisionTarget {
  int n_ions = 0;
  double delta_Hz = 0.0;
  double branch_precision_Hz = 0.0;
  double total_time_s = 0.0;
  double computed_factor = 0.0;
  double stated_factor = 0.0;
  double fractional_computed = 0.0;
  double fractional_stated = 0.0;
};

BranchPrecisionTarget branch_precision_target(int n_ions, double delta_Hz, double contrast, double cycle_time_s,
                                              double branch_precision_Hz);

struct IsotopeMeasurement {
  std::string label;
  double delta = 0.0;
  double sigma = 0.0;
};

struct IsotopeRatio {
  std::string numerator;
  std::string denominator;
  double ratio = 0.0;
  double sigma_experimental = 0.0;
  double sigma_theory = 0.0;
  double sigma_total = 0.0;
};

inline constexpr double kIsotopeTheoryFloor = 0.002;

/// All pairs i < j as delta_i / delta_j. First-order propagation of the
/// experimental errors, plus a correlated theory term theory_fraction * |ratio|
/// added once per ratio in quadrature. Throws ZeroDenominator when a |delta| is
/// below 1e-15 rad/s.
std::vector<IsotopeRatio> isotope_ratio(std::span<const IsotopeMeasurement> measurements,
                                        double theory_fraction = kIsotopeTheoryFloor);

inline constexpr double kReachAnchorTeV = 20.0;
inline constexpr double kReachAnchorPrecision = 0.0035;
/// Reach quoted alongside the formula for 0.01 % precision.
inline constexpr double kStatedReachAtOneBasisPointTeV = 150.0;

/// Contact-interaction scaling anchored at the cesium point:
/// 20 TeV * sqrt(0.0035 / fractional_precision).
double bsm_reach(double fractional_precision);

}  // namespace apv::protocol
