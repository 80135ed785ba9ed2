#include "apv/spin_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "apv/rng.hpp"

namespace apv::spin {

namespace {

using Mat2 = Eigen::Matrix2cd;

// Index order 0 = down, 1 = up; sigma_z |up> = +|up>.
Mat2 pauli_dot(const Vec3& n) {
  const Complex i(0.0, 1.0);
  Mat2 m;
  m << -n.z(), n.x() + i * n.y(),
       n.x() - i * n.y(), n.z();
  return m;
}

Mat2 single_ion_propagator(const Vec3& b, double t) {
  const double magnitude = b.norm();
  if (magnitude == 0.0) return Mat2::Identity();
  const double theta = 0.5 * magnitude * t;
  return std::cos(theta) * Mat2::Identity() - Complex(0.0, std::sin(theta)) * pauli_dot(b / magnitude);
}

int bit_position(int n_ions, int ion) { return n_ions - 1 - ion; }

bool is_up(BasisIndex s, int n_ions, int ion) { return ((s >> bit_position(n_ions, ion)) & 1U) != 0; }

void check_fields(std::span<const EffectiveField> fields, int n_ions) {
  for (const auto& f : fields) {
    if (f.ion_count() != n_ions) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("effective field has {} ions, state has {}", f.ion_count(), n_ions));
    }
    for (const auto& b : f.b) {
      if (!b.allFinite()) throw Error(ErrorCode::InvalidArgument, "effective field must be finite");
    }
  }
}

// E(s) = sum over layers of sum_i (+-1/2) b_z,i. Each layer is summed on its own first.
double diagonal_energy(std::span<const EffectiveField> fields, BasisIndex s, int n_ions) {
  double energy = 0.0;
  for (const auto& f : fields) {
    double layer = 0.0;
    for (int i = 0; i < n_ions; ++i) layer += is_up(s, n_ions, i) ? f.b[i].z() : -f.b[i].z();
    energy += 0.5 * layer;
  }
  return energy;
}

void check_ion_count(int n_ions, int limit) {
  if (n_ions < 1) throw Error(ErrorCode::InvalidArgument, "ion count must be at least 1");
  if (n_ions > limit) {
    throw Error(ErrorCode::DimensionTooLarge, fmt::format("{} ions exceeds the limit of {}", n_ions, limit));
  }
}

}  // namespace

PureState PureState::basis(int n_ions, BasisIndex index) {
  check_ion_count(n_ions, kMaxStateVectorIons);
  const std::size_t dim = std::size_t{1} << n_ions;
  if (index >= dim) throw Error(ErrorCode::InvalidArgument, "basis index out of range");
  std::vector<Complex> a(dim, Complex(0.0));
  a[index] = 1.0;
  return PureState(n_ions, std::move(a));
}

PureState PureState::from_amplitudes(int n_ions, std::vector<Complex> amplitudes) {
  check_ion_count(n_ions, kMaxStateVectorIons);
  if (amplitudes.size() != (std::size_t{1} << n_ions)) {
    throw Error(ErrorCode::InvalidArgument, "amplitude vector must have length 2^N");
  }
  double n2 = 0.0;
  for (const auto& c : amplitudes) n2 += std::norm(c);
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw Error(ErrorCode::InvalidArgument, "state must be normalizable");
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& c : amplitudes) c *= inv;
  return PureState(n_ions, std::move(amplitudes));
}

double PureState::norm() const {
  double n2 = 0.0;
  for (const auto& c : amplitudes_) n2 += std::norm(c);
  return std::sqrt(n2);
}

EffectiveField EffectiveField::along_z(std::span<const double> bz) {
  EffectiveField f;
  f.b.reserve(bz.size());
  for (double z : bz) f.b.emplace_back(0.0, 0.0, z);
  return f;
}

EffectiveField EffectiveField::uniform_z(int n_ions, double bz) {
  return EffectiveField{std::vector<Vec3>(static_cast<std::size_t>(n_ions), Vec3(0.0, 0.0, bz))};
}

bool EffectiveField::is_diagonal() const {
  return std::all_of(b.begin(), b.end(), [](const Vec3& v) { return v.x() == 0.0 && v.y() == 0.0; });
}

BasisIndex parse_branch(std::string_view bits) {
  if (bits.empty() || bits.size() > static_cast<std::size_t>(kMaxStateVectorIons)) {
    throw Error(ErrorCode::InvalidArgument, "branch label has invalid length");
  }
  BasisIndex s = 0;
  for (char c : bits) {
    s <<= 1U;
    if (c == 'u' || c == '1') {
      s |= 1U;
    } else if (c != 'd' && c != '0') {
      throw Error(ErrorCode::InvalidArgument, fmt::format("invalid branch character '{}'", c));
    }
  }
  return s;
}

BasisIndex alternating_branch(int n_ions, bool first_up) {
  check_ion_count(n_ions, kMaxStateVectorIons);
  BasisIndex s = 0;
  for (int i = 0; i < n_ions; ++i) {
    const bool up = (i % 2 == 0) == first_up;
    if (up) s |= BasisIndex{1} << bit_position(n_ions, i);
  }
  return s;
}

PureState prepare_alternating_ghz(int n_ions) {
  check_ion_count(n_ions, kMaxStateVectorIons);
  std::vector<Complex> a(std::size_t{1} << n_ions, Complex(0.0));
  const double h = 1.0 / std::sqrt(2.0);
  a[alternating_branch(n_ions, false)] = h;
  a[alternating_branch(n_ions, true)] = h;
  return PureState::from_amplitudes(n_ions, std::move(a));
}

PureState evolve(const PureState& state, std::span<const EffectiveField> fields, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "evolution time must be >= 0");
  const int n = state.ion_count();
  check_fields(fields, n);
  std::vector<Complex> a(state.amplitudes().begin(), state.amplitudes().end());

  const bool diagonal = std::all_of(fields.begin(), fields.end(), [](const auto& f) { return f.is_diagonal(); });
  if (diagonal) {
    for (BasisIndex s = 0; s < a.size(); ++s) {
      if (a[s] == Complex(0.0)) continue;
      a[s] *= std::polar(1.0, -diagonal_energy(fields, s, n) * t);
    }
    return PureState::from_amplitudes(n, std::move(a));
  }

  for (int ion = 0; ion < n; ++ion) {
    Vec3 total = Vec3::Zero();
    for (const auto& f : fields) total += f.b[ion];
    const Mat2 u = single_ion_propagator(total, t);
    const BasisIndex mask = BasisIndex{1} << bit_position(n, ion);
    for (BasisIndex s = 0; s < a.size(); ++s) {
      if (s & mask) continue;
      const Complex down = a[s];
      const Complex up = a[s | mask];
      a[s] = u(0, 0) * down + u(0, 1) * up;
      a[s | mask] = u(1, 0) * down + u(1, 1) * up;
    }
  }
  return PureState::from_amplitudes(n, std::move(a));
}

PureState evolve_dense_oracle(const PureState& state, std::span<const EffectiveField> fields, double t) {
  const int n = state.ion_count();
  check_ion_count(n, kMaxDenseIons);
  check_fields(fields, n);
  const Eigen::Index dim = static_cast<Eigen::Index>(state.dimension());

  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& f : fields) {
    for (int ion = 0; ion < n; ++ion) {
      const Mat2 local = 0.5 * pauli_dot(f.b[ion]);
      const int pos = bit_position(n, ion);
      for (Eigen::Index col = 0; col < dim; ++col) {
        const auto c = static_cast<BasisIndex>(col);
        const int cb = static_cast<int>((c >> pos) & 1U);
        for (int rb = 0; rb < 2; ++rb) {
          const BasisIndex row = (c & ~(BasisIndex{1} << pos)) | (BasisIndex(rb) << pos);
          h(static_cast<Eigen::Index>(row), col) += local(rb, cb);
        }
      }
    }
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
  const Eigen::VectorXcd phases =
      (eig.eigenvalues().cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
  const Eigen::MatrixXcd& v = eig.eigenvectors();

  Eigen::VectorXcd psi(dim);
  for (Eigen::Index i = 0; i < dim; ++i) psi(i) = state.amplitudes()[static_cast<std::size_t>(i)];
  const Eigen::VectorXcd out = v * phases.asDiagonal() * (v.adjoint() * psi);
  return PureState::from_amplitudes(n, std::vector<Complex>(out.data(), out.data() + dim));
}

double relative_phase_rate(std::span<const EffectiveField> fields, BasisIndex branch_a, BasisIndex branch_b) {
  if (fields.empty()) return 0.0;
  const int n = fields.front().ion_count();
  check_ion_count(n, kMaxStateVectorIons);
  check_fields(fields, n);
  for (const auto& f : fields) {
    for (const auto& b : f.b) {
      if (std::hypot(b.x(), b.y()) > 1e-12 * b.norm()) {
        throw Error(ErrorCode::NonDiagonalField, "relative phase rate requires fields along the quantization axis");
      }
    }
  }
  const BasisIndex dim = BasisIndex{1} << n;
  if (branch_a >= dim || branch_b >= dim) throw Error(ErrorCode::InvalidArgument, "branch index out of range");
  return diagonal_energy(fields, branch_a, n) - diagonal_energy(fields, branch_b, n);
}

double relative_phase_rate(std::span<const EffectiveField> fields, std::string_view branch_a,
                           std::string_view branch_b) {
  if (!fields.empty() && (static_cast<int>(branch_a.size()) != fields.front().ion_count() ||
                          static_cast<int>(branch_b.size()) != fields.front().ion_count())) {
    throw Error(ErrorCode::InvalidArgument, "branch labels must have one character per ion");
  }
  return relative_phase_rate(fields, parse_branch(branch_a), parse_branch(branch_b));
}

double signal_factor(int n_ions) {
  std::vector<double> pattern(static_cast<std::size_t>(n_ions));
  for (int i = 0; i < n_ions; ++i) pattern[i] = (i % 2 == 0) ? 1.0 : -1.0;
  const EffectiveField unit = EffectiveField::along_z(pattern);
  return relative_phase_rate(std::span(&unit, 1), alternating_branch(n_ions, false),
                             alternating_branch(n_ions, true));
}

double branch_phase(const PureState& state) {
  const int n = state.ion_count();
  const Complex a = state.amplitude(alternating_branch(n, false));
  const Complex b = state.amplitude(alternating_branch(n, true));
  return std::arg(b * std::conj(a));
}

double ghz_parity(const PureState& state, double analysis_phase) {
  const int n = state.ion_count();
  const Complex a = state.amplitude(alternating_branch(n, false));
  const Complex b = state.amplitude(alternating_branch(n, true));
  return 2.0 * (std::conj(a) * b * std::polar(1.0, n * analysis_phase)).real();
}

double RamseyOutcome::empirical_parity() const {
  const auto n = shots();
  if (n == 0) return 0.0;
  return (static_cast<double>(even) - static_cast<double>(odd)) / static_cast<double>(n);
}

std::vector<RamseyOutcome> ramsey_scan(std::span<const EffectiveField> fields, double wait,
                                       std::span<const double> analysis_phases, std::uint64_t shots,
                                       double contrast, std::uint64_t seed) {
  if (shots < 1) throw Error(ErrorCode::InvalidArgument, "shots must be at least 1");
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw Error(ErrorCode::InvalidArgument, "contrast must lie in [0, 1]");
  if (fields.empty()) throw Error(ErrorCode::InvalidArgument, "at least one effective field is required");
  const int n = fields.front().ion_count();
  const PureState psi = evolve(prepare_alternating_ghz(n), fields, wait);

  std::vector<RamseyOutcome> out;
  out.reserve(analysis_phases.size());
  for (std::size_t j = 0; j < analysis_phases.size(); ++j) {
    RamseyOutcome o;
    o.analysis_phase = analysis_phases[j];
    o.wait_time = wait;
    o.parity_expectation = std::clamp(contrast * ghz_parity(psi, analysis_phases[j]), -1.0, 1.0);
    auto engine = rng::make_engine(rng::derive_seed(seed, j));
    std::binomial_distribution<std::uint64_t> draw(shots, 0.5 * (1.0 + o.parity_expectation));
    o.even = draw(engine);
    o.odd = shots - o.even;
    out.push_back(o);
  }
  return out;
}

RamseyOutcome ramsey_sequence(std::span<const EffectiveField> fields, double wait, double analysis_phase,
                              std::uint64_t shots, double contrast, std::uint64_t seed) {
  return ramsey_scan(fields, wait, std::span(&analysis_phase, 1), shots, contrast, seed).front();
}

double wrap_phase(double phase) {
  double w = std::remainder(phase, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

PhaseFit extract_phase(std::span<const RamseyOutcome> outcomes, int n_ions, ParitySource source) {
  if (n_ions < 1) throw Error(ErrorCode::InvalidArgument, "ion count must be at least 1");
  std::vector<double> phases;
  for (const auto& o : outcomes) phases.push_back(o.analysis_phase);
  std::sort(phases.begin(), phases.end());
  phases.erase(std::unique(phases.begin(), phases.end()), phases.end());
  if (phases.size() < 3 || phases.back() - phases.front() < kPi / n_ions - 1e-12) {
    throw Error(ErrorCode::FitDegenerate, "need at least 3 distinct analysis phases spanning pi/N");
  }

  const auto m = static_cast<Eigen::Index>(outcomes.size());
  Eigen::MatrixXd x(m, 2);
  Eigen::VectorXd y(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& o = outcomes[static_cast<std::size_t>(j)];
    x(j, 0) = std::cos(n_ions * o.analysis_phase);
    x(j, 1) = -std::sin(n_ions * o.analysis_phase);
    y(j) = source == ParitySource::Empirical ? o.empirical_parity() : o.parity_expectation;
  }
  if (y.maxCoeff() - y.minCoeff() <= 1e-14) {
    throw Error(ErrorCode::FitDegenerate, "parities show no fringe (all values equal)");
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < 2) throw Error(ErrorCode::FitDegenerate, "fringe design matrix is rank deficient");
  const Eigen::Vector2d coef = qr.solve(y);
  const double amplitude = coef.norm();
  if (!(amplitude > 1e-12)) throw Error(ErrorCode::FitDegenerate, "fitted fringe amplitude is zero");

  // Sandwich covariance with binomial variances at the fitted parities.
  const Eigen::Matrix2d bread = (x.transpose() * x).inverse();
  const Eigen::VectorXd fitted = x * coef;
  Eigen::VectorXd var(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double p = std::clamp(fitted(j), -1.0, 1.0);
    const auto shots = outcomes[static_cast<std::size_t>(j)].shots();
    var(j) = shots > 0 ? (1.0 - p * p) / static_cast<double>(shots) : 0.0;
  }
  const Eigen::Matrix2d cov = bread * (x.transpose() * var.asDiagonal() * x) * bread;

  const Eigen::Vector2d dphase(-coef(1) / (amplitude * amplitude), coef(0) / (amplitude * amplitude));
  const Eigen::Vector2d damp = coef / amplitude;

  PhaseFit fit;
  fit.phase = wrap_phase(std::atan2(coef(1), coef(0)));
  fit.sigma = std::sqrt(std::max(0.0, dphase.dot(cov * dphase)));
  fit.amplitude = amplitude;
  fit.amplitude_sigma = std::sqrt(std::max(0.0, damp.dot(cov * damp)));
  return fit;
}

}  // namespace apv::spin
