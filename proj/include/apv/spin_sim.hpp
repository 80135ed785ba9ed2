#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "apv/common.hpp"

namespace apv::spin {

/// Computational-basis index. Ion 0 is the most significant bit; a 0 bit is
/// |down> (m_s = -1/2), a 1 bit is |up> (m_s = +1/2).
using BasisIndex = std::uint64_t;

inline constexpr int kMaxStateVectorIons = 24;
inline constexpr int kMaxDenseIons = 10;

class PureState {
 public:
  static PureState basis(int n_ions, BasisIndex index);
  /// Normalizes; throws InvalidArgument on a zero or wrongly sized vector.
  static PureState from_amplitudes(int n_ions, std::vector<Complex> amplitudes);

  int ion_count() const noexcept { return n_ions_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  Complex amplitude(BasisIndex index) const { return amplitudes_.at(index); }
  double norm() const;

 private:
  PureState(int n, std::vector<Complex> a) : n_ions_(n), amplitudes_(std::move(a)) {}
  int n_ions_;
  std::vector<Complex> amplitudes_;
};

/// One additive contribution to the single-ion Hamiltonians H_i = b_i . sigma / 2,
/// one vector per ion (rad/s, quantization axis along z). Evolution takes a list
/// of these so that common-mode and differential parts stay separate numbers:
/// a shift identical on all ions then cancels exactly between balanced branches
/// instead of being lost to rounding inside a larger per-ion total.
struct EffectiveField {
  std::vector<Vec3> b;

  static EffectiveField along_z(std::span<const double> bz);
  static EffectiveField uniform_z(int n_ions, double bz);
  int ion_count() const noexcept { return static_cast<int>(b.size()); }
  bool is_diagonal() const;
};

/// Parses 'd'/'0' (down) and 'u'/'1' (up), ion 0 first.
BasisIndex parse_branch(std::string_view bits);
/// down-up-down-... when first_up is false, up-down-up-... otherwise.
BasisIndex alternating_branch(int n_ions, bool first_up);

/// (|du du ...> + |ud ud ...>)/sqrt(2); (|d> + |u>)/sqrt(2) for one ion.
PureState prepare_alternating_ghz(int n_ions);

/// Free evolution: tensor product of exp(-i t b_i.sigma/2) over ions.
PureState evolve(const PureState& state, std::span<const EffectiveField> fields, double t);

/// Same map from the dense 2^N x 2^N Hamiltonian via eigendecomposition.
/// Throws DimensionTooLarge for N > 10.
PureState evolve_dense_oracle(const PureState& state, std::span<const EffectiveField> fields, double t);

/// E(a) - E(b) with E(s) = sum_i (+-1/2) b_z,i: the rate at which the phase of
/// <b|psi> advances relative to <a|psi>. Throws NonDiagonalField if any
/// transverse component exceeds 1e-12 |b|.
double relative_phase_rate(std::span<const EffectiveField> fields, BasisIndex branch_a, BasisIndex branch_b);
double relative_phase_rate(std::span<const EffectiveField> fields, std::string_view branch_a,
                           std::string_view branch_b);

/// Branch-rate convention used everywhere: a = du du ..., b = ud ud ..., and the
/// branch phase is arg<b|psi> - arg<a|psi>. For a per-ion PNC pattern
/// (+D, -D, +D, ...) the phase advances at signal_factor(N) * D.
double signal_factor(int n_ions);

double branch_phase(const PureState& state);

/// GHZ parity readout after an ideal analysis pulse of phase `analysis_phase`:
/// 2 Re[conj(<a|psi>) <b|psi> e^{i N phase}] = 2|ab| cos(phi + N phase).
double ghz_parity(const PureState& state, double analysis_phase);

struct RamseyOutcome {
  double analysis_phase = 0.0;
  double parity_expectation = 0.0;
  std::uint64_t even = 0;
  std::uint64_t odd = 0;
  double wait_time = 0.0;

  std::uint64_t shots() const noexcept { return even + odd; }
  double empirical_parity() const;
};

/// Prepares the alternating GHZ state, evolves for `wait`, and reads out the
/// parity at each analysis phase with contrast `contrast`. Point j draws its
/// binomial sample from seed rng::derive_seed(seed, j).
std::vector<RamseyOutcome> ramsey_scan(std::span<const EffectiveField> fields, double wait,
                                       std::span<const double> analysis_phases, std::uint64_t shots,
                                       double contrast, std::uint64_t seed);

RamseyOutcome ramsey_sequence(std::span<const EffectiveField> fields, double wait, double analysis_phase,
                              std::uint64_t shots, double contrast, std::uint64_t seed);

enum class ParitySource { Empirical, Expectation };

struct PhaseFit {
  double phase = 0.0;  // (-pi, pi]
  double sigma = 0.0;
  double amplitude = 0.0;
  double amplitude_sigma = 0.0;
};

/// Least-squares fit of A cos(N phi_a + phi). The covariance uses the binomial
/// projection-noise variance (1 - P^2)/shots at the fitted parities.
PhaseFit extract_phase(std::span<const RamseyOutcome> outcomes, int n_ions,
                       ParitySource source = ParitySource::Empirical);

/// Wraps to (-pi, pi].
double wrap_phase(double phase);

}  // namespace apv::spin
