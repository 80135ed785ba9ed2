#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "apv/field_geometry.hpp"
#include "apv/shifts.hpp"
#include "apv/spin_sim.hpp"

namespace testing {

using apv::Complex;
using apv::CVec3;
using apv::Vec3;

inline Vec3 random_unit(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  Vec3 v(n(g), n(g), n(g));
  return v.normalized();
}

inline apv::geom::StandingWave random_wave(std::mt19937_64& g, double wavelength) {
  std::uniform_real_distribution<double> u(0.0, apv::kTwoPi);
  std::uniform_real_distribution<double> amp(1e3, 2e6);
  std::normal_distribution<double> n;
  const Vec3 k = random_unit(g);
  CVec3 p;
  for (int i = 0; i < 3; ++i) p(i) = Complex(n(g), n(g));
  p -= k.cast<Complex>() * k.cast<Complex>().dot(p);
  return apv::geom::StandingWave::from_wavelength(k, wavelength, amp(g), apv::geom::Polarization::from_vector(p), u(g),
                                                  u(g));
}

inline apv::geom::FieldConfiguration random_configuration(std::mt19937_64& g) {
  std::uniform_real_distribution<double> lambda(400e-9, 3000e-9);
  const double wl = lambda(g);
  return apv::geom::FieldConfiguration::make(random_wave(g, wl), random_wave(g, wl), random_unit(g),
                                             Vec3(0.0, 0.0, 5e-4));
}

inline Vec3 random_point(std::mt19937_64& g, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(g), u(g), u(g));
}

// Real instantaneous field written out from the standing-wave definition,
// independent of the library's complex-amplitude helpers.
inline Vec3 real_field(const apv::geom::StandingWave& w, const Vec3& r, double t) {
  const double envelope = w.amplitude() * std::cos(w.wavevector().dot(r) + w.spatial_phase());
  const Complex carrier = std::polar(1.0, w.temporal_phase() - w.omega() * t);
  return envelope * (w.polarization().vector() * carrier).real();
}

// Central finite differences of the real fields in both space and time.
// Accurate to roughly 1e-6 relative; used as a coarse, fully independent check.
inline Vec3 shift_by_finite_differences(const apv::geom::FieldConfiguration& c, const Vec3& r,
                                        const apv::shifts::EtaModel& eta, int samples = 128) {
  const auto& pc = c.pc_wave;
  const double period = apv::kTwoPi / pc.omega();
  const double hx = 1e-4 / pc.wavevector().norm();
  const double ht = 1e-4 * period;
  auto dV = [&](const Vec3& x, double t) -> Vec3 {
    return (real_field(pc, x, t + ht) - real_field(pc, x, t - ht)) / (2 * ht);
  };
  Vec3 acc = Vec3::Zero();
  for (int n = 0; n < samples; ++n) {
    const double t = period * n / samples;
    const Vec3 e = real_field(c.pnc_wave, r, t);
    // J(a, l) = d V_a / d x_l
    Eigen::Matrix3d J;
    for (int l = 0; l < 3; ++l) {
      Vec3 d = Vec3::Zero();
      d(l) = hx;
      J.col(l) = (dV(r + d, t) - dV(r - d, t)) / (2 * hx);
    }
    const Vec3 directional = J * e;
    const Vec3 curl(J(2, 1) - J(1, 2), J(0, 2) - J(2, 0), J(1, 0) - J(0, 1));
    acc += 2.0 * directional + e.cross(curl);
  }
  return eta.coupling(pc) * acc / static_cast<double>(samples);
}

inline Eigen::MatrixXcd pauli_sum_dense(std::span<const apv::spin::EffectiveField> fields, int n) {
  Eigen::Matrix2cd sx, sy, sz, id;
  // (down, up) ordering
  sx << 0, 1, 1, 0;
  sy << 0, Complex(0, 1), Complex(0, -1), 0;
  sz << -1, 0, 0, 1;
  id.setIdentity();
  const Eigen::Index dim = Eigen::Index(1) << n;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& f : fields) {
    for (int i = 0; i < n; ++i) {
      const Vec3& b = f.b[static_cast<std::size_t>(i)];
      const Eigen::Matrix2cd local = 0.5 * (b.x() * sx + b.y() * sy + b.z() * sz);
      Eigen::MatrixXcd op = Eigen::MatrixXcd::Identity(1, 1);
      for (int j = 0; j < n; ++j) {
        const Eigen::MatrixXcd next = Eigen::kroneckerProduct(op, j == i ? local : id).eval();
        op = next;
      }
      h += op;
    }
  }
  return h;
}

// Matrix-exponential oracle (Pade scaling-and-squaring), independent of the
// library's eigendecomposition route.
inline std::vector<Complex> evolve_by_expm(const apv::spin::PureState& s,
                                           std::span<const apv::spin::EffectiveField> fields, double t) {
  const Eigen::MatrixXcd h = pauli_sum_dense(fields, s.ion_count());
  const Eigen::MatrixXcd u = (Complex(0, -t) * h).exp();
  Eigen::VectorXcd v(static_cast<Eigen::Index>(s.dimension()));
  for (std::size_t i = 0; i < s.dimension(); ++i) v(static_cast<Eigen::Index>(i)) = s.amplitudes()[i];
  const Eigen::VectorXcd out = u * v;
  return {out.data(), out.data() + out.size()};
}

inline std::vector<apv::spin::EffectiveField> random_layers(std::mt19937_64& g, int n, int layers, double scale,
                                                            bool diagonal) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<apv::spin::EffectiveField> out(static_cast<std::size_t>(layers));
  for (auto& f : out) {
    for (int i = 0; i < n; ++i) f.b.push_back(diagonal ? Vec3(0, 0, d(g)) : Vec3(d(g), d(g), d(g)));
  }
  return out;
}

inline apv::spin::PureState random_state(std::mt19937_64& g, int n) {
  std::normal_distribution<double> d;
  std::vector<Complex> a(std::size_t(1) << n);
  for (auto& x : a) x = Complex(d(g), d(g));
  return apv::spin::PureState::from_amplitudes(n, std::move(a));
}

inline double max_deviation(std::span<const Complex> a, std::span<const Complex> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing
