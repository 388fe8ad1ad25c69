#pragma once

// Time evolution of deviation states: ideal rotations, free precession under
// a weak-coupling (secular) Hamiltonian, and phenomenological T1/T2
// relaxation.
//
// The free Hamiltonian is diagonal in the Zeeman product basis:
//   H = sum_i 2*pi*shift_i * Iz_i  +  sum_{i<j} 2*pi*J_ij * Iz_i*Iz_j  (rad/s)
// so coherent evolution only phases off-diagonal elements.  Relaxation acts
// elementwise too: element (r,c) decays at sum of 1/T2 over the spins whose
// bits differ between r and c, while the diagonal (populations) relaxes
// toward thermal equilibrium with per-spin T1 in the product-of-sigma_z
// (Walsh) coefficient basis.  Because the two superoperators commute
// sector-by-sector in this model, the split-step integrator below is exact
// for any step size; stepping exists so that step-size overrides and
// convergence checks remain meaningful.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "spincool/core.hpp"

namespace spincool::dynamics {

using core::MatrixXcd;
using core::SpinState;
using core::SpinSystem;
using core::VectorXd;

struct Pulse {
  std::vector<int> targets;  // resolved spin indices, non-empty, unique
  double angle_rad = 0.0;
  double phase_rad = 0.0;    // 0 = x, pi/2 = y
  bool selective = false;    // bookkeeping; timing windows are separate delays
};

struct Delay {
  double duration_s = 0.0;
  bool relaxation = true;  // false = spin-echo-style window, coherent only
  std::optional<core::Species> decouple;  // drop heteronuclear J to this species
};

struct EvolveOptions {
  double step_override_s = 0.0;    // 0 -> automatic bound
  bool relaxation_enabled = true;  // global kill switch (idealized run)
};

// Diagonal of the free Hamiltonian in rad/s, basis-index order.  Decoupling
// removes every J term that couples exactly one spin of the given species.
VectorXd hamiltonian_diagonal(const SpinSystem& system,
                              std::optional<core::Species> decouple = std::nullopt);

// Dense matrix form of the same operator (diagonal); for inspection/tests.
MatrixXcd free_hamiltonian(const SpinSystem& system,
                           std::optional<core::Species> decouple = std::nullopt);

// Ideal instantaneous rotation exp(-i*angle*I_phase) applied to each target
// spin: I_phase = cos(phase)*Ix + sin(phase)*Iy.  Cost O(4^n) per target.
void apply_pulse(SpinState& state, const SpinSystem& system, const Pulse& pulse);

// Automatic integrator step bound: min(T2_min/100, 1/(100*max|J|)).
double default_step_s(const SpinSystem& system);

// Precomputed per-step factors, shareable across delays of equal step size.
// A cache instance is tied to the first system it is used with.
class PropagatorCache {
 public:
  struct StepFactors {
    double h_s = 0.0;
    Eigen::ArrayXXcd element_factor;  // exp(-i*dtheta*h - R*h); diagonal = 1
    VectorXd t1_decay;                // per-spin exp(-h/T1)
  };

  std::shared_ptr<const StepFactors> step_factors(const SpinSystem& system, double h_s,
                                                  std::optional<core::Species> decouple);

 private:
  struct Key {
    std::uint64_t h_bits;
    int decouple;  // -1 none
    bool operator<(const Key& o) const {
      return h_bits != o.h_bits ? h_bits < o.h_bits : decouple < o.decouple;
    }
  };

  std::mutex mutex_;
  const void* bound_system_ = nullptr;
  std::map<Key, std::shared_ptr<const StepFactors>> entries_;
};

// Evolves the state through a delay.  Dispatch:
//   - relaxation off (either switch): exact closed-form coherent phases;
//   - purely diagonal state: closed-form population relaxation (identical to
//     the step composition, since the diagonal sector is autonomous);
//   - otherwise: split-step loop with n = ceil(duration/h) uniform steps.
// Throws std::invalid_argument on negative/non-finite duration or bad step.
void evolve_delay(SpinState& state, const SpinSystem& system, const Delay& delay,
                  const EvolveOptions& options = {}, PropagatorCache* cache = nullptr);

}  // namespace spincool::dynamics
