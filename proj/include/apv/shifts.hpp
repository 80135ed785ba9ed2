#pragma once

#include "apv/field_geometry.hpp"

namespace apv::shifts {

/// Calibrated parity-violating coupling.
///
/// The vector shift is
///
///   Delta = C * < 2 (E_pnc . grad) dE_pc/dt + E_pnc x (curl dE_pc/dt) >_t,
///   C     = eta_e_a0 * omega_over_rabi * (e a0 / hbar) / (omega_pc * |k_pc| * 1 V/m),
///
/// which is in rad/s when the fields are in SI units. Only the product
/// eta_e_a0 * omega_over_rabi is physically meaningful here; it is normally
/// obtained from calibrate_eta(). eta_e_a0 is a pseudoscalar, so its sign is kept.
struct EtaModel {
  double eta_e_a0 = 1.0;
  double omega_over_rabi = 1.0;

  /// Throws InvalidArgument unless omega_over_rabi > 0 and eta is finite.
  static EtaModel make(double eta_e_a0, double omega_over_rabi = 1.0);
  double coupling(const geom::StandingWave& pc_wave) const;
};

/// Per-ion Larmor shift decomposition, rad/s.
struct ShiftBudget {
  int site_index = 0;
  double pnc = 0.0;              // parity-odd
  double zeeman = 0.0;           // parity-even
  double quad_systematic = 0.0;  // parity-even
  double stray = 0.0;            // parity-even

  double total() const { return pnc + zeeman + quad_systematic + stray; }
  double parity_even() const { return zeeman + quad_systematic + stray; }
};

/// One realization of the parity-even systematics.
struct SystematicsInstance {
  double ellipticity = 0.0;
  geom::EulerAngles misalignment;
  double B_gradient_T_per_m = 0.0;           // d(B . axis)/dx along the trap axis
  double stray_common_rad_per_s = 0.0;       // identical on every ion
  double stray_gradient_rad_per_s_per_m = 0.0;
  double phase_translation_error_rad = 0.0;  // consumed by the phase-swap protocol
  double coupling_ratio = 1e7;
};

Vec3 pnc_shift_vector(const geom::FieldConfiguration& config, const Vec3& r, const EtaModel& eta);

/// Brute-force time average of the real instantaneous integrand over one optical
/// period on `samples` uniform points (periodic trapezoid rule). Uses the
/// grad(E.V) - (E.grad)V form of the cross-product term, so it does not share the
/// algebra of pnc_shift_vector.
Vec3 pnc_shift_numeric(const geom::FieldConfiguration& config, const Vec3& r, const EtaModel& eta,
                       int samples = 256);

/// |C| * w |k_pc| E_pnc E_pc: an upper bound on |pnc_shift_vector| for the
/// configuration, used as the scale for "identically zero" decisions.
double shift_scale(const geom::FieldConfiguration& config, const EtaModel& eta);

double larmor_shift(const Vec3& shift_vector, const Vec3& quantization_axis);

/// Chooses eta so the Larmor projection at `r` equals `target_shift` (rad/s).
/// A zero target yields eta 0; a nonzero target on a zero-shift geometry throws
/// ZeroShiftGeometry.
EtaModel calibrate_eta(const geom::FieldConfiguration& config, const Vec3& r, double target_shift,
                       double omega_over_rabi = 1.0);

/// Parity-even spin-dependent quadrupole shift mimicking the PNC signal:
/// coupling_ratio * pnc_reference * ellipticity * sin(a_x) sin(a_y) sin(a_z).
double quad_systematic_shift(double ellipticity, const geom::EulerAngles& misalignment,
                             double pnc_reference, double coupling_ratio = 1e7);

ShiftBudget build_budget(const geom::FieldConfiguration& config, const geom::IonSite& site,
                         const EtaModel& eta, const SystematicsInstance& systematics);

}  // namespace apv::shifts
