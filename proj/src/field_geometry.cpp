#include "apv/field_geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <fmt/format.h>

namespace apv {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::FrequencyMismatch: return "FrequencyMismatch";
    case ErrorCode::ZeroShiftGeometry: return "ZeroShiftGeometry";
    case ErrorCode::NonDiagonalField: return "NonDiagonalField";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::FitDegenerate: return "FitDegenerate";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace geom {

namespace {

constexpr double kTransverseTolerance = 1e-9;
constexpr double kAxisNormTolerance = 1e-12;
constexpr double kDegenerateTolerance = 1e-12;

void require_finite(const Vec3& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, fmt::format("{} must be finite", what));
}

}  // namespace

Polarization Polarization::from_vector(const CVec3& p) {
  const double n = p.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::InvalidArgument, "polarization vector must be finite and nonzero");
  }
  return Polarization(p / n);
}

Polarization Polarization::linear(const Vec3& direction) {
  return from_vector(direction.cast<Complex>());
}

Polarization Polarization::circular(const Vec3& e1, const Vec3& e2, int handedness) {
  const Vec3 a = e1.normalized();
  const Vec3 b = (e2 - a.dot(e2) * a).normalized();
  const Complex i(0.0, handedness >= 0 ? 1.0 : -1.0);
  return from_vector(a.cast<Complex>() + i * b.cast<Complex>());
}

double Polarization::ellipticity() const {
  const CVec3 pc = p_.conjugate();
  const CVec3 cross = p_.cross(pc);
  return cross.imag().norm();
}

Mat3 rotation_matrix(const EulerAngles& a) {
  return (Eigen::AngleAxisd(a.x, Vec3::UnitX()) * Eigen::AngleAxisd(a.y, Vec3::UnitY()) *
          Eigen::AngleAxisd(a.z, Vec3::UnitZ()))
      .toRotationMatrix();
}

StandingWave StandingWave::make(const Vec3& direction, double omega, double amplitude,
                                const Polarization& polarization, double spatial_phase,
                                double temporal_phase, const EulerAngles& misalignment) {
  require_finite(direction, "wave direction");
  if (!(direction.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "wave direction must be nonzero");
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw Error(ErrorCode::InvalidArgument, "angular frequency must be positive");
  }
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw Error(ErrorCode::InvalidArgument, "amplitude must be finite and non-negative");
  }
  if (!std::isfinite(spatial_phase) || !std::isfinite(temporal_phase)) {
    throw Error(ErrorCode::InvalidArgument, "phases must be finite");
  }
  const Vec3 khat = direction.normalized();
  const double overlap = std::abs(polarization.vector().dot(khat.cast<Complex>()));
  if (overlap >= kTransverseTolerance) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("polarization is not transverse to k (|p.k| = {:.3g})", overlap));
  }
  const StandingWave nominal(khat * (omega / phys::kSpeedOfLight), omega, amplitude, polarization,
                             spatial_phase, temporal_phase, EulerAngles{});
  return apply_misalignment(nominal, misalignment);
}

StandingWave StandingWave::from_wavelength(const Vec3& direction, double wavelength_m,
                                           double amplitude, const Polarization& polarization,
                                           double spatial_phase, double temporal_phase,
                                           const EulerAngles& misalignment) {
  if (!(wavelength_m > 0.0) || !std::isfinite(wavelength_m)) {
    throw Error(ErrorCode::InvalidArgument, "wavelength must be positive");
  }
  const double omega = kTwoPi * phys::kSpeedOfLight / wavelength_m;
  return make(direction, omega, amplitude, polarization, spatial_phase, temporal_phase, misalignment);
}

double StandingWave::wavelength() const { return kTwoPi / k_.norm(); }

StandingWave StandingWave::with_amplitude(double amplitude) const {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw Error(ErrorCode::InvalidArgument, "amplitude must be finite and non-negative");
  }
  StandingWave w = *this;
  w.amplitude_ = amplitude;
  return w;
}

StandingWave StandingWave::with_temporal_phase(double phase) const {
  StandingWave w = *this;
  w.temporal_phase_ = phase;
  return w;
}

StandingWave StandingWave::with_spatial_phase(double phase) const {
  StandingWave w = *this;
  w.spatial_phase_ = phase;
  return w;
}

FieldConfiguration FieldConfiguration::make(const StandingWave& pnc, const StandingWave& pc,
                                            const Vec3& quantization_axis, const Vec3& static_B) {
  require_finite(quantization_axis, "quantization axis");
  require_finite(static_B, "static B field");
  if (std::abs(quantization_axis.norm() - 1.0) > kAxisNormTolerance) {
    throw Error(ErrorCode::InvalidArgument, "quantization axis must have unit norm");
  }
  return FieldConfiguration{pnc, pc, quantization_axis, static_B};
}

IonSite IonSite::make(const Vec3& position, int index, int node_parity) {
  require_finite(position, "ion position");
  if (index < 0) throw Error(ErrorCode::InvalidArgument, "ion index must be non-negative");
  if (node_parity != 1 && node_parity != -1) {
    throw Error(ErrorCode::InvalidArgument, "node parity must be +1 or -1");
  }
  return IonSite{position, index, node_parity};
}

FieldConfiguration default_configuration() {
  using defaults::kWavelength;
  const auto pnc = StandingWave::from_wavelength(Vec3::UnitZ(), kWavelength, defaults::kPncAmplitude,
                                                 Polarization::linear(Vec3::UnitX()), 0.0, kPi / 2);
  const auto pc = StandingWave::from_wavelength(Vec3::UnitX(), kWavelength, defaults::kPcAmplitude,
                                                Polarization::linear(Vec3::UnitZ()), kPi / 2, 0.0);
  return FieldConfiguration::make(pnc, pc, Vec3::UnitZ(), Vec3(0.0, 0.0, defaults::kStaticBz));
}

CVec3 complex_field_at(const StandingWave& wave, const Vec3& r) {
  const double envelope = wave.amplitude() * std::cos(wave.wavevector().dot(r) + wave.spatial_phase());
  return wave.polarization().vector() * (envelope * std::polar(1.0, wave.temporal_phase()));
}

CVec3 complex_field_at(std::span<const StandingWave> waves, const Vec3& r) {
  CVec3 sum = CVec3::Zero();
  for (const auto& w : waves) sum += complex_field_at(w, r);
  return sum;
}

CMat3 gradient_at(const StandingWave& wave, const Vec3& r) {
  const double slope = -wave.amplitude() * std::sin(wave.wavevector().dot(r) + wave.spatial_phase());
  const CVec3 a = wave.polarization().vector() * (slope * std::polar(1.0, wave.temporal_phase()));
  return a * wave.wavevector().cast<Complex>().transpose();
}

StandingWave translate_phase(const StandingWave& wave, double delta_phase) {
  return wave.with_spatial_phase(wave.spatial_phase() + delta_phase);
}

std::vector<Vec3> find_nodes(const StandingWave& wave, const Vec3& r0, const Vec3& r1) {
  const Vec3 d = r1 - r0;
  if (!(d.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "segment endpoints must differ");
  const Vec3 khat = wave.wavevector().normalized();
  if (std::abs(khat.dot(d.normalized())) < kDegenerateTolerance) {
    throw Error(ErrorCode::DegenerateSegment, "segment is orthogonal to the wavevector");
  }
  // Phase along the segment: theta(s) = theta0 + s * span, s in [0, 1).
  const double theta0 = wave.wavevector().dot(r0) + wave.spatial_phase();
  const double span = wave.wavevector().dot(d);
  const double lo = std::min(theta0, theta0 + span);
  const double hi = std::max(theta0, theta0 + span);
  constexpr double kEdge = 1e-9;

  std::vector<double> params;
  for (double m = std::ceil((lo - kPi / 2) / kPi - kEdge);; m += 1.0) {
    const double theta = kPi / 2 + m * kPi;
    if (theta > hi + kEdge * kPi) break;
    double s = (theta - theta0) / span;
    if (s < 0.0) s = (s > -1e-12) ? 0.0 : s;
    if (s >= 0.0 && s < 1.0 - 1e-12) params.push_back(s);
  }
  std::sort(params.begin(), params.end());

  std::vector<Vec3> nodes;
  nodes.reserve(params.size());
  for (double s : params) nodes.emplace_back(r0 + s * d);
  return nodes;
}

StandingWave apply_misalignment(const StandingWave& wave, const EulerAngles& angles) {
  const Mat3 rot = rotation_matrix(angles);
  StandingWave w = wave;
  w.k_ = rot * wave.k_;
  w.polarization_ = Polarization::from_vector(rot.cast<Complex>() * wave.polarization_.vector());
  w.misalignment_ = EulerAngles{wave.misalignment_.x + angles.x, wave.misalignment_.y + angles.y,
                                wave.misalignment_.z + angles.z};
  return w;
}

std::vector<IonSite> place_ions_on_nodes(const StandingWave& pc, int count, const Vec3& origin,
                                         const Vec3& trap_axis) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "ion count must be at least 1");
  if (!(trap_axis.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "trap axis must be nonzero");
  const Vec3 axis = trap_axis.normalized();
  const double k_along = std::abs(pc.wavevector().dot(axis));
  if (k_along < kDegenerateTolerance * pc.wavevector().norm()) {
    throw Error(ErrorCode::DegenerateSegment, "trap axis is orthogonal to the E_PC wavevector");
  }
  const double spacing = kPi / k_along;
  const auto nodes = find_nodes(pc, origin, origin + axis * (spacing * (count + 1)));
  if (static_cast<int>(nodes.size()) < count) {
    throw Error(ErrorCode::InvalidArgument, "could not place the requested number of ions");
  }
  std::vector<IonSite> sites;
  sites.reserve(count);
  for (int i = 0; i < count; ++i) sites.push_back(IonSite::make(nodes[i], i, (i % 2 == 0) ? 1 : -1));
  return sites;
}

}  // namespace geom
}  // namespace apv
