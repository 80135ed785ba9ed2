#include <doctest.h>

#include "approx.hpp"

#include <limits>

#include "apv/protocol.hpp"
#include "support.hpp"

using namespace apv;
using namespace apv::protocol;

namespace {

const double kTarget = kTwoPi * 0.4;

CampaignConfig base_config(int n_ions) {
  CampaignConfig c;
  c.n_ions = n_ions;
  c.eta = shifts::calibrate_eta(c.fields, Vec3::Zero(), kTarget);
  c.analysis_phases = uniform_phase_grid(32);
  c.wait_s = 1.0;
  c.shots_per_point = 2000;
  c.trials = 20;
  c.master_seed = 5;
  return c;
}

SystematicsBudget zero_budget() {
  SystematicsBudget b;
  b.ellipticity = Distribution::fixed(0.0);
  b.misalignment_rad = {Distribution::fixed(0.0), Distribution::fixed(0.0), Distribution::fixed(0.0)};
  b.B_gradient_T_per_m = Distribution::fixed(0.0);
  b.stray_common_rad_per_s = Distribution::fixed(0.0);
  b.stray_gradient_rad_per_s_per_m = Distribution::fixed(0.0);
  b.phase_translation_error_rad = Distribution::fixed(0.0);
  return b;
}

SystematicsBudget percent_budget() {
  SystematicsBudget b = zero_budget();
  b.ellipticity = Distribution::uniform(0.0, 1.0);
  b.misalignment_rad = {Distribution::normal(0.0, 1e-2), Distribution::normal(0.0, 1e-2),
                        Distribution::normal(0.0, 1e-2)};
  b.B_gradient_T_per_m = Distribution::normal(0.0, 1e-5);
  b.stray_common_rad_per_s = Distribution::normal(0.0, 10.0);
  b.stray_gradient_rad_per_s_per_m = Distribution::normal(0.0, 1e5);
  return b;
}

}  // namespace

TEST_CASE("distributions") {
  rng::Engine e = rng::make_engine(1);
  CHECK(Distribution::fixed(2.5).sample(e) == 2.5);
  const auto u = Distribution::uniform(-1.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u.sample(e);
    CHECK(x >= -1.0);
    CHECK(x < 3.0);
  }
  CHECK(u.nominal() == 1.0);
  CHECK(Distribution::normal(4.0, 2.0).nominal() == 4.0);
  CHECK_THROWS_AS(Distribution::uniform(2.0, 1.0).validate("x"), Error);
  CHECK_THROWS_AS(Distribution::normal(0.0, -1.0).validate("x"), Error);
  CHECK_THROWS_AS(Distribution::fixed(NAN).validate("x"), Error);

  auto b = zero_budget();
  b.ellipticity = Distribution::normal(0.5, 0.1);
  CHECK_THROWS_AS(b.validate(), Error);
  b.ellipticity = Distribution::uniform(0.0, 1.2);
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("derived seeds are distinct and stable") {
  CHECK(rng::derive_seed(1, 0) != rng::derive_seed(1, 1));
  CHECK(rng::derive_seed(1, 0) != rng::derive_seed(2, 0));
  CHECK(rng::derive_seed(7, 3) == rng::derive_seed(7, 3));
}

TEST_CASE("phase swap without systematics is exact") {
  const auto c = base_config(2);
  const auto r = run_phase_swap_pair(c, shifts::SystematicsInstance{}, SwapOptions{true, 1, {}});
  CHECK(std::abs(r.delta_estimate - kTarget) <= 1e-12 * kTarget);
  CHECK(std::abs(r.residual_systematic) <= 1e-12 * kTarget);
}

TEST_CASE("phase swap cancels arbitrary diagonal parity-even patterns") {
  std::mt19937_64 g(17);
  for (int n : {2, 4, 6}) {
    auto c = base_config(n);
    c.wait_s = 1e-3;
    for (int trial = 0; trial < 10; ++trial) {
      std::uniform_real_distribution<double> u(-300.0, 300.0);
      std::vector<double> pattern;
      for (int i = 0; i < n; ++i) pattern.push_back(u(g));
      const std::vector<spin::EffectiveField> extra{spin::EffectiveField::along_z(pattern)};
      const auto r = run_phase_swap_pair(c, shifts::SystematicsInstance{}, SwapOptions{true, 0, extra});
      CHECK(std::abs(r.delta_estimate - kTarget) <= 1e-10 * kTarget);
      const double expected_residual = spin::relative_phase_rate(extra, spin::alternating_branch(n, false),
                                                                 spin::alternating_branch(n, true));
      CHECK(r.residual_systematic == testing::approx(expected_residual).epsilon(1e-9));
    }
  }
}

TEST_CASE("phase swap needs an even ion count") {
  CHECK_THROWS_AS(run_phase_swap_pair(base_config(3), shifts::SystematicsInstance{}), Error);
}

TEST_CASE("imperfect translation biases the estimate by the cosine of the error") {
  const auto c = base_config(2);
  shifts::SystematicsInstance s;
  s.phase_translation_error_rad = 1e-3;
  const auto r = run_phase_swap_pair(c, s, SwapOptions{true, 0, {}});
  const double expected = 0.5 * kTarget * (1.0 + std::cos(1e-3));
  CHECK(r.delta_estimate == testing::approx(expected).epsilon(1e-12));
  CHECK(r.delta_estimate != testing::approx(kTarget).epsilon(1e-9));
}

TEST_CASE("single configuration on an odd chain") {
  const auto c = base_config(3);
  const auto run = run_single_configuration(c, shifts::SystematicsInstance{}, SwapOptions{true, 0, {}});
  const double rate = spin::signal_factor(3) * kTarget;
  // odd chains see the full Zeeman term; it is removed by the rotating frame only to rounding
  const double zeeman = phys::kGyromagneticRatio * c.fields.static_B.norm();
  CHECK(std::abs(run.rate - rate) <= 4 * std::numeric_limits<double>::epsilon() * zeeman);
}

TEST_CASE("Monte Carlo with a zero budget has no bias") {
  auto c = base_config(2);
  c.trials = 1;
  const auto r = run_montecarlo(c, zero_budget());
  CHECK(std::abs(r.systematic_bias) <= 1e-12 * kTarget);
  CHECK(r.fit_failures == 0);
  CHECK(r.true_delta == testing::approx(kTarget).epsilon(1e-12));
}

TEST_CASE("Monte Carlo precision improves with shots toward zero") {
  auto c = base_config(2);
  c.trials = 5;
  c.shots_per_point = 1000;
  const double coarse = run_montecarlo(c, zero_budget()).fractional_precision;
  c.shots_per_point = 1000000;
  const double fine = run_montecarlo(c, zero_budget()).fractional_precision;
  CHECK(fine == testing::approx(coarse / std::sqrt(1000.0)).epsilon(1e-6));
}

TEST_CASE("Monte Carlo is deterministic and independent of thread count") {
  auto c = base_config(2);
  const auto a = run_montecarlo(c, percent_budget());
  const auto b = run_montecarlo(c, percent_budget());
  c.threads = 3;
  const auto t = run_montecarlo(c, percent_budget());
  for (const auto* other : {&b, &t}) {
    CHECK(a.delta_pnc_estimate == other->delta_pnc_estimate);
    CHECK(a.statistical_sigma == other->statistical_sigma);
    CHECK(a.empirical_spread == other->empirical_spread);
    CHECK(a.systematic_bias == other->systematic_bias);
    REQUIRE(a.per_trial.size() == other->per_trial.size());
    for (std::size_t i = 0; i < a.per_trial.size(); ++i) CHECK(a.per_trial[i].estimate == other->per_trial[i].estimate);
  }
}

TEST_CASE("Monte Carlo statistics: spread agrees with the fit sigma") {
  auto c = base_config(2);
  c.trials = 400;
  const auto r = run_montecarlo(c, percent_budget());
  CHECK(r.empirical_spread == testing::approx(r.statistical_sigma).epsilon(0.12));
  CHECK(std::abs(r.delta_pnc_estimate - r.true_delta) < 4 * r.statistical_sigma / std::sqrt(400.0));
}

TEST_CASE("fit failures are counted, not dropped") {
  auto c = base_config(2);
  c.analysis_phases = {0.0, 0.1, 0.2};  // spans less than pi / N
  c.trials = 10;
  c.max_fit_failure_fraction = 0.0;
  const auto r = run_montecarlo(c, zero_budget());
  CHECK(r.fit_failures == 10);
  CHECK(r.fit_failure_fraction == testing::approx(r.fit_failures / 10.0));
  CHECK(r.fit_failures_exceed_threshold);
}

TEST_CASE("precision projection scaling") {
  const double p = precision_projection(2, kTarget, 1.0, 1.0, 1e4);
  CHECK(precision_projection(4, kTarget, 1.0, 1.0, 1e4) == testing::approx(p / 2).epsilon(1e-15));
  CHECK(precision_projection(2, kTarget, 1.0, 1.0, 4e4) == testing::approx(p / 2).epsilon(1e-15));
  double prev = HUGE_VAL;
  for (int n = 1; n <= 16; ++n) {
    const double x = precision_projection(n, kTarget, 1.0, 1.0, 1e4);
    CHECK(x < prev);
    prev = x;
  }
  CHECK(precision_projection(2, kTarget, 0.5, 1.0, 1e4) > p);
  CHECK_THROWS_AS(precision_projection(2, 0.0, 1.0, 1.0, 1.0), Error);
}

TEST_CASE("fourteen-ion 1 mHz target") {
  const auto t = branch_precision_target(14, 0.4, 1.0, 1.0, 1e-3);
  CHECK(t.total_time_s == testing::approx(1.0 / std::pow(kTwoPi * 1e-3, 2)).epsilon(1e-12));
  CHECK(t.fractional_computed == testing::approx(1e-3 / (14 * 0.4)).epsilon(1e-12));
  CHECK(t.fractional_stated == testing::approx(1e-3 / (28 * 0.4)).epsilon(1e-12));
}

TEST_CASE("isotope ratios") {
  const IsotopeMeasurement same[] = {{"a", 2.0, 0.02}, {"b", 2.0, 0.02}};
  const auto r = isotope_ratio(same, 0.0);
  REQUIRE(r.size() == 1);
  CHECK(r[0].ratio == 1.0);
  CHECK(r[0].sigma_experimental == testing::approx(std::sqrt(2.0) * 0.01).epsilon(1e-12));

  const IsotopeMeasurement exact[] = {{"a", 3.0, 0.0}, {"b", 2.0, 0.0}, {"c", -1.0, 0.0}};
  const auto e = isotope_ratio(exact);
  REQUIRE(e.size() == 3);
  for (const auto& x : e) CHECK(x.sigma_total == testing::approx(0.002 * std::abs(x.ratio)).epsilon(1e-12));

  const IsotopeMeasurement bad[] = {{"a", 1.0, 0.1}, {"b", 1e-16, 0.1}};
  try {
    isotope_ratio(bad);
    FAIL("expected ZeroDenominator");
  } catch (const Error& ex) {
    CHECK(ex.code() == ErrorCode::ZeroDenominator);
  }
}

TEST_CASE("isotope ratio propagation against sampling") {
  const IsotopeMeasurement m[] = {{"a", 2.5, 0.02}, {"b", 1.7, 0.015}};
  const auto r = isotope_ratio(m).front();
  std::mt19937_64 g(2);
  std::normal_distribution<double> na(2.5, 0.02), nb(1.7, 0.015);
  const int samples = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double q = na(g) / nb(g);
    s += q;
    ss += q * q;
  }
  const double mean = s / samples;
  const double sd = std::sqrt(ss / samples - mean * mean);
  CHECK(r.sigma_experimental == testing::approx(sd).epsilon(0.02));
}

TEST_CASE("reach scaling") {
  CHECK(bsm_reach(0.0035) == 20.0);
  CHECK(bsm_reach(0.0035 / 4) == testing::approx(40.0).epsilon(1e-14));
  CHECK(bsm_reach(1e-4) == testing::approx(118.32).epsilon(1e-4));
  CHECK(bsm_reach(1e-3) > bsm_reach(2e-3));
  CHECK_THROWS_AS(bsm_reach(0.0), Error);
}
