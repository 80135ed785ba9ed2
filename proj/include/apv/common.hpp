#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace apv {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using CMat3 = Eigen::Matrix3cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// SI values, CODATA 2018.
namespace phys {
inline constexpr double kSpeedOfLight = 299792458.0;           // m/s
inline constexpr double kElementaryCharge = 1.602176634e-19;   // C
inline constexpr double kHbar = 1.054571817e-34;               // J s
inline constexpr double kBohrRadius = 5.29177210903e-11;       // m
inline constexpr double kBohrMagneton = 9.2740100783e-24;      // J/T
inline constexpr double kElectronGFactor = 2.00231930436256;   // |g_s|, S_1/2 ground state
/// Ground-state Larmor angular frequency per tesla, rad/s/T.
inline constexpr double kGyromagneticRatio = kElectronGFactor * kBohrMagneton / kHbar;
}  // namespace phys

enum class ErrorCode {
  InvalidArgument,
  DegenerateSegment,
  FrequencyMismatch,
  ZeroShiftGeometry,
  NonDiagonalField,
  DimensionTooLarge,
  FitDegenerate,
  ZeroDenominator,
  Schema,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type for the library; the code tells callers (and the C
/// layer) which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace apv
