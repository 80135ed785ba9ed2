#pragma once

#include <span>
#include <vector>

#include "apv/common.hpp"

namespace apv::geom {

/// Unit-norm complex Jones vector in the lab frame.
class Polarization {
 public:
  /// Normalizes `p`; throws InvalidArgument for a zero vector.
  static Polarization from_vector(const CVec3& p);
  static Polarization linear(const Vec3& direction);
  /// (e1 + i*handedness*e2)/sqrt(2) for orthonormal e1, e2.
  static Polarization circular(const Vec3& e1, const Vec3& e2, int handedness = +1);

  const CVec3& vector() const noexcept { return p_; }
  /// |Im(p x p*)|: 0 for linear, 1 for circular.
  double ellipticity() const;

 private:
  explicit Polarization(const CVec3& p) : p_(p) {}
  CVec3 p_;
};

/// Intrinsic rotations about x, then y', then z'': R = Rx(x) * Ry(y) * Rz(z).
struct EulerAngles {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

Mat3 rotation_matrix(const EulerAngles& angles);

/// Monochromatic vector standing wave
///
///   A(r) = E0 * p * cos(k.r + phi_s) * exp(i phi_t),   E(r, t) = Re[A(r) exp(-i w t)].
///
/// k and p are stored after the misalignment rotation has been applied; the
/// recorded `misalignment()` is the sum of all angles applied so far (exact for a
/// single rotation, bookkeeping only when several are composed).
class StandingWave {
 public:
  /// `direction` need not be normalized. Throws InvalidArgument when the
  /// polarization is not transverse to `direction` (|p.k^| >= 1e-9), or when
  /// omega/amplitude are not finite and positive / non-negative.
  static StandingWave make(const Vec3& direction, double omega, double amplitude,
                           const Polarization& polarization, double spatial_phase,
                           double temporal_phase, const EulerAngles& misalignment = {});
  static StandingWave from_wavelength(const Vec3& direction, double wavelength_m, double amplitude,
                                      const Polarization& polarization, double spatial_phase,
                                      double temporal_phase, const EulerAngles& misalignment = {});

  const Vec3& wavevector() const noexcept { return k_; }
  double amplitude() const noexcept { return amplitude_; }
  const Polarization& polarization() const noexcept { return polarization_; }
  double spatial_phase() const noexcept { return spatial_phase_; }
  double temporal_phase() const noexcept { return temporal_phase_; }
  const EulerAngles& misalignment() const noexcept { return misalignment_; }
  double omega() const noexcept { return omega_; }
  double wavelength() const;

  StandingWave with_amplitude(double amplitude) const;
  StandingWave with_temporal_phase(double phase) const;
  StandingWave with_spatial_phase(double phase) const;

 private:
  StandingWave(const Vec3& k, double omega, double amplitude, const Polarization& p,
               double spatial_phase, double temporal_phase, const EulerAngles& misalignment)
      : k_(k), omega_(omega), amplitude_(amplitude), polarization_(p),
        spatial_phase_(spatial_phase), temporal_phase_(temporal_phase), misalignment_(misalignment) {}

  friend StandingWave apply_misalignment(const StandingWave&, const EulerAngles&);

  Vec3 k_;
  double omega_;
  double amplitude_;
  Polarization polarization_;
  double spatial_phase_;
  double temporal_phase_;
  EulerAngles misalignment_;
};

/// Crossed-wave geometry seen by the ions plus the analyzing field.
struct FieldConfiguration {
  StandingWave pnc_wave;
  StandingWave pc_wave;
  Vec3 quantization_axis;
  Vec3 static_B;  // tesla

  /// Throws InvalidArgument unless |quantization_axis| = 1 within 1e-12.
  static FieldConfiguration make(const StandingWave& pnc, const StandingWave& pc,
                                 const Vec3& quantization_axis, const Vec3& static_B);
};

struct IonSite {
  Vec3 position;
  int index = 0;
  int node_parity = 1;  // (-1)^index for successive E_PC nodes

  static IonSite make(const Vec3& position, int index, int node_parity);
};

namespace defaults {
inline constexpr double kWavelength = 2052e-9;        // m, S_1/2 -> D_3/2 quadrupole line
inline constexpr double kPncAmplitude = 1.5e6;        // V/m
inline constexpr double kPcAmplitude = 5.0e4;         // V/m
inline constexpr double kStaticBz = 5.0e-4;           // T
}  // namespace defaults

/// E_PNC along z polarized along x with an antinode at the origin, E_PC along x
/// polarized along z with a node at the origin, the two in temporal quadrature.
FieldConfiguration default_configuration();

CVec3 complex_field_at(const StandingWave& wave, const Vec3& r);
/// Sum of the fields of independent waves; superpositions are kept as lists.
CVec3 complex_field_at(std::span<const StandingWave> waves, const Vec3& r);

/// G(j, l) = dA_j / dx_l, evaluated analytically.
CMat3 gradient_at(const StandingWave& wave, const Vec3& r);

StandingWave translate_phase(const StandingWave& wave, double delta_phase);

/// Nodes on the half-open segment [r0, r1), sorted from r0 towards r1.
/// Throws DegenerateSegment when the segment is orthogonal to k (within 1e-12).
std::vector<Vec3> find_nodes(const StandingWave& wave, const Vec3& r0, const Vec3& r1);

/// Rotates k and p jointly by rotation_matrix(angles).
StandingWave apply_misalignment(const StandingWave& wave, const EulerAngles& angles);

/// `count` ions on successive nodes of `pc` along `trap_axis`, starting with the
/// first node at or after `origin`. Node parity alternates starting at +1.
std::vector<IonSite> place_ions_on_nodes(const StandingWave& pc, int count, const Vec3& origin,
                                         const Vec3& trap_axis);

}  // namespace apv::geom
