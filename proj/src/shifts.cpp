#include "apv/shifts.hpp"

#include <cmath>

#include <fmt/format.h>

namespace apv::shifts {

namespace {

using geom::FieldConfiguration;

constexpr double kFrequencyTolerance = 1e-9;
constexpr double kEtaFieldUnit = 1.0;  // V/m
constexpr double kEa0OverHbar = phys::kElementaryCharge * phys::kBohrRadius / phys::kHbar;

void check_frequencies(const FieldConfiguration& config) {
  const double w1 = config.pnc_wave.omega();
  const double w2 = config.pc_wave.omega();
  if (std::abs(w1 - w2) > kFrequencyTolerance * std::max(w1, w2)) {
    throw Error(ErrorCode::FrequencyMismatch,
                fmt::format("E_PNC and E_PC angular frequencies differ ({:.12g} vs {:.12g} rad/s)", w1, w2));
  }
}

}  // namespace

EtaModel EtaModel::make(double eta_e_a0, double omega_over_rabi) {
  if (!std::isfinite(eta_e_a0)) throw Error(ErrorCode::InvalidArgument, "eta must be finite");
  if (!(omega_over_rabi > 0.0) || !std::isfinite(omega_over_rabi)) {
    throw Error(ErrorCode::InvalidArgument, "omega_over_rabi must be positive");
  }
  return EtaModel{eta_e_a0, omega_over_rabi};
}

double EtaModel::coupling(const geom::StandingWave& pc_wave) const {
  const double norm = pc_wave.omega() * pc_wave.wavevector().norm() * kEtaFieldUnit;
  return eta_e_a0 * omega_over_rabi * kEa0OverHbar / norm;
}

Vec3 pnc_shift_vector(const FieldConfiguration& config, const Vec3& r, const EtaModel& eta) {
  check_frequencies(config);
  const double omega = config.pc_wave.omega();
  const CVec3 e = geom::complex_field_at(config.pnc_wave, r);
  // Gradient of the complex amplitude of dE_pc/dt: -i w G.
  const CMat3 dv = Complex(0.0, -omega) * geom::gradient_at(config.pc_wave, r);

  // <Re[X e^{-iwt}] Re[Y e^{-iwt}]>_t = Re[X conj(Y)] / 2
  const Vec3 directional = (dv.conjugate() * e).real();  // 2 (E.grad)V averaged
  // curl_m = eps_mab d_a V_b, with d_a V_b = dv(b, a)
  const CVec3 curl(dv(2, 1) - dv(1, 2), dv(0, 2) - dv(2, 0), dv(1, 0) - dv(0, 1));
  const Vec3 cross = 0.5 * e.cross(curl.conjugate()).real();

  return eta.coupling(config.pc_wave) * (directional + cross);
}

Vec3 pnc_shift_numeric(const FieldConfiguration& config, const Vec3& r, const EtaModel& eta,
                       int samples) {
  if (samples < 64) throw Error(ErrorCode::InvalidArgument, "numeric time average needs at least 64 samples");
  check_frequencies(config);
  const double omega = config.pc_wave.omega();
  const double period = kTwoPi / omega;
  const CVec3 e_amp = geom::complex_field_at(config.pnc_wave, r);
  const CMat3 g_amp = geom::gradient_at(config.pc_wave, r);

  Vec3 acc = Vec3::Zero();
  for (int n = 0; n < samples; ++n) {
    const double t = period * n / samples;
    const Complex carrier = std::polar(1.0, -omega * t);
    const Vec3 e = (e_amp * carrier).real();
    // d/dt Re[G e^{-iwt}] = Re[-i w G e^{-iwt}] = w Im[G e^{-iwt}]
    const Mat3 d = omega * (g_amp * carrier).imag();
    // 2 (E.grad)V + E x curl V = (E.grad)V + grad(E.V)|_E
    acc += d * e + d.transpose() * e;
  }
  return eta.coupling(config.pc_wave) * acc / static_cast<double>(samples);
}

double shift_scale(const FieldConfiguration& config, const EtaModel& eta) {
  return std::abs(eta.coupling(config.pc_wave)) * config.pc_wave.omega() * config.pc_wave.wavevector().norm() *
         config.pnc_wave.amplitude() * config.pc_wave.amplitude();
}

double larmor_shift(const Vec3& shift_vector, const Vec3& quantization_axis) {
  return shift_vector.dot(quantization_axis);
}

EtaModel calibrate_eta(const FieldConfiguration& config, const Vec3& r, double target_shift,
                       double omega_over_rabi) {
  if (!std::isfinite(target_shift)) throw Error(ErrorCode::InvalidArgument, "calibration target must be finite");
  const EtaModel unit = EtaModel::make(1.0, omega_over_rabi);
  const double unit_shift = larmor_shift(pnc_shift_vector(config, r, unit), config.quantization_axis);
  if (target_shift == 0.0) return EtaModel::make(0.0, omega_over_rabi);
  const double scale = shift_scale(config, unit);
  if (!(std::abs(unit_shift) > 1e-12 * scale)) {
    throw Error(ErrorCode::ZeroShiftGeometry,
                "the geometry produces no parity-violating Larmor shift; eta cannot be calibrated");
  }
  return EtaModel::make(target_shift / unit_shift, omega_over_rabi);
}

double quad_systematic_shift(double ellipticity, const geom::EulerAngles& misalignment,
                             double pnc_reference, double coupling_ratio) {
  if (!(ellipticity >= 0.0 && ellipticity <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "ellipticity must lie in [0, 1]");
  }
  const double alignment = std::sin(misalignment.x) * std::sin(misalignment.y) * std::sin(misalignment.z);
  return coupling_ratio * pnc_reference * ellipticity * alignment;
}

ShiftBudget build_budget(const FieldConfiguration& config, const geom::IonSite& site,
                         const EtaModel& eta, const SystematicsInstance& sys) {
  const Vec3& axis = config.quantization_axis;
  const double x = site.position.x();

  ShiftBudget b;
  b.site_index = site.index;
  b.pnc = larmor_shift(pnc_shift_vector(config, site.position, eta), axis);
  b.zeeman = phys::kGyromagneticRatio * (config.static_B.dot(axis) + sys.B_gradient_T_per_m * x);
  b.quad_systematic = quad_systematic_shift(sys.ellipticity, sys.misalignment, std::abs(b.pnc), sys.coupling_ratio);
  b.stray = sys.stray_common_rad_per_s + sys.stray_gradient_rad_per_s_per_m * x;
  return b;
}

}  // namespace apv::shifts
