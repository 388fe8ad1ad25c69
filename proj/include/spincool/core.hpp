#pragma once

// Spin-system description and deviation-density-matrix states for small
// heteronuclear spin-1/2 ensembles in the high-temperature approximation.
//
// A state stores the traceless Hermitian deviation of the density matrix
// from the maximally mixed background, in units of the equilibrium 13C
// polarization (epsilon_ref).  The absolute polarization is a bookkeeping
// unit and is never exponentiated anywhere in this library.
//
// Basis convention: spin 0 is the leftmost Kronecker factor (most
// significant bit of the basis index); bit value 0 means m = +1/2.

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spincool::core {

using complexd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

enum class Species { H1, C13 };

std::string to_string(Species s);
Species species_from_string(const std::string& text);  // throws std::invalid_argument

// Equilibrium polarization relative to 13C; the proton value is the
// gyromagnetic-ratio quotient used throughout (overridable per spin).
inline constexpr double kDefaultGammaRelH1 = 3.977;

double default_gamma_rel(Species s);

struct Nucleus {
  std::string label;
  Species species = Species::C13;
  double gamma_rel = 1.0;  // equilibrium polarization in units of the 13C value
};

// Plain inputs for building a validated SpinSystem.
struct SpinDef {
  std::string label;
  Species species = Species::C13;
  double shift_hz = 0.0;  // rotating-frame offset
  double t1_s = 0.0;
  double t2_s = 0.0;
  double gamma_rel = 0.0;  // 0 -> species default
  bool operator==(const SpinDef&) const = default;
};

struct JCoupling {
  std::string a;
  std::string b;
  double hz = 0.0;
  bool operator==(const JCoupling&) const = default;
};

inline constexpr int kMaxSpins = 8;  // dense 256x256 operators stay cheap

class SpinSystem {
 public:
  int size() const { return static_cast<int>(nuclei_.size()); }
  int dim() const { return 1 << size(); }

  const Nucleus& nucleus(int i) const { return nuclei_.at(i); }
  double shift_hz(int i) const { return shift_(i); }
  double t1_s(int i) const { return t1_(i); }
  double t2_s(int i) const { return t2_(i); }
  double j_hz(int i, int j) const { return j_(i, j); }
  double temperature_k() const { return temperature_k_; }

  int index_of(const std::string& label) const;             // throws on unknown label
  std::optional<int> find(const std::string& label) const;  // no-throw lookup
  std::vector<int> spins_of(Species s) const;

  double min_t2_s() const;
  double max_abs_j_hz() const;

  // Basis-index helpers (bit 0 of a basis index <-> the last spin).
  int bit_of(int basis_index, int spin) const {
    return (basis_index >> (size() - 1 - spin)) & 1;
  }
  // +1 for m = +1/2, -1 for m = -1/2.
  int sign_of(int basis_index, int spin) const { return 1 - 2 * bit_of(basis_index, spin); }
  // Bit mask selecting `spin` inside a basis index.
  std::uint32_t mask_of(int spin) const { return 1u << (size() - 1 - spin); }

  friend SpinSystem build_spin_system(const std::vector<SpinDef>& spins,
                                      const std::vector<JCoupling>& couplings,
                                      double temperature_k);

 private:
  SpinSystem() = default;

  std::vector<Nucleus> nuclei_;
  VectorXd shift_;  // Hz
  VectorXd t1_;     // s
  VectorXd t2_;     // s
  Eigen::MatrixXd j_;  // Hz, symmetric, zero diagonal
  double temperature_k_ = 0.0;
};

// Validates and assembles a system.  Throws std::invalid_argument on:
// empty or oversized spin list, duplicate/reserved labels, unknown species,
// non-positive T1/T2, T2 > 2*T1, non-positive gamma, couplings referencing
// unknown labels or the same spin twice, conflicting duplicate couplings,
// non-positive temperature.
SpinSystem build_spin_system(const std::vector<SpinDef>& spins,
                             const std::vector<JCoupling>& couplings,
                             double temperature_k);

struct SpinState {
  MatrixXcd deviation;       // traceless Hermitian, units of epsilon_ref
  double epsilon_ref = 1.0;  // equilibrium 13C polarization (bookkeeping only)
};

// Throws std::invalid_argument unless deviation is dim x dim Hermitian and
// traceless to 1e-12 (relative to its magnitude) and epsilon_ref > 0.
void validate_state(const SpinState& state, int dim);

SpinState make_state(MatrixXcd deviation, int dim, double epsilon_ref = 1.0);

// Equilibrium deviation: sum_i gamma_rel_i * Iz_i (diagonal).
SpinState thermal_state(const SpinSystem& system);

// Per-spin longitudinal polarizations; thermal 13C reads exactly 1.
// eps_i = 2 tr(deviation * Iz_i) / 2^(n-1).
VectorXd polarizations(const SpinSystem& system, const SpinState& state);

// Single-spin operator I_axis on `spin` (axis in {'x','y','z'}) embedded in
// the full 2^n-dimensional space.  Intended for analysis and tests; the
// evolution code never materializes these.
MatrixXcd single_spin_operator(int n_spins, int spin, char axis);

// Coefficient of `op` in `a` under the Frobenius inner product:
// tr(op^dagger a) / tr(op^dagger op).
double operator_coefficient(const MatrixXcd& a, const MatrixXcd& op);

}  // namespace spincool::core
