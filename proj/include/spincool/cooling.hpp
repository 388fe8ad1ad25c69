#pragma once

// Heat-bath cooling primitives: selective reset (polarization transfer plus
// repolarization delay), 3-bit compression, schedule-driven cooling loops,
// and the entropy-bound bookkeeping around them.
//
// Conventions fixed here:
//   * A selective reset's transfer stage is treated as unitary (relaxation
//     is switched off while its pulses and echoes run); relaxation acts only
//     during the explicit repolarization delay.  The transfer lasts
//     milliseconds against multi-second delays, and the exactness makes the
//     reset composable with analytic recovery oracles.
//   * 3-bit compression is the population-sorting permutation on the chosen
//     trio's 8-dimensional subspace, extended by identity: group populations
//     are ranked (stable on ties) and re-assigned so the four largest sit in
//     the pump spin's "up" half.  For three equal polarizations this is the
//     textbook boost to 1.5x in deviation units.
//   * The entropy proxy is the sum of squared per-spin polarizations; the
//     exact von Neumann entropy of (1 + eps0 * deviation)/2^n is reported
//     alongside it as a guard against proxy artifacts.

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spincool/core.hpp"
#include "spincool/report.hpp"
#include "spincool/sequences.hpp"

namespace spincool::cooling {

using core::SpinState;
using core::SpinSystem;

// Lifetime ratio R = t1_c / t1_r.  Throws std::invalid_argument unless both
// are positive.
double t1_ratio(double t1_c_s, double t1_r_s);

// Effective spin temperature after cooling by `factor` from equilibrium at
// t_equilibrium_k.  Throws std::invalid_argument unless factor > 0.
double spin_temperature(double factor, double t_equilibrium_k);

// Ideal cooling limit for n computation spins sharing one reset spin:
// 2^(n-1) * pt_factor.  Throws std::invalid_argument if n < 1.
double ac_ideal_limit(int n_computation, double pt_factor);

// One reset step: transfer polarization from `reset` onto `computation`
// (directly when they are J-coupled, otherwise through a single intermediate
// spin coupled to both), then let the system relax for delay_s.
// Throws std::invalid_argument when the labels coincide, the delay is
// negative, or no coupling path exists.
SpinState selective_reset(const SpinState& state, const SpinSystem& system,
                          const std::string& computation, const std::string& reset,
                          const sequences::DelayPlan& plan, double delay_s);

// Population-sorting compression on three distinct spins; the spin at
// labels[pump_index] receives the concentrated polarization.  Acts as a
// permutation unitary on the full state (identity on the other spins).
// Throws std::invalid_argument on duplicate/unknown labels or a pump index
// outside [0, 3).
SpinState three_bit_compression(const SpinState& state, const SpinSystem& system,
                                const std::array<std::string, 3>& labels, int pump_index);

// Schedule steps.
struct ResetSpec {
  std::string computation;
  std::string reset;
  double delay_s = 0.0;
  bool operator==(const ResetSpec&) const = default;
};

struct CompressSpec {
  std::array<std::string, 3> labels;
  int pump_index = 0;
  bool operator==(const CompressSpec&) const = default;
};

using ScheduleStep = std::variant<ResetSpec, CompressSpec>;
using Schedule = std::vector<ScheduleStep>;

// Runs `schedule` `rounds` times from the thermal state.  Reset steps build
// their delay plans from the system's own couplings (single-spin source,
// zero-width pulses).  The report carries final enhancement factors, the
// entropy bookkeeping against the thermal start, spin temperatures at the
// system's equilibrium temperature, and per-round factors.
// Throws std::invalid_argument on an empty schedule or rounds < 1.
CoolingReport run_ac(const SpinSystem& system, const Schedule& schedule, int rounds);

// Entropy accounting between two states of the same system.  bypassed is
// true when the proxy strictly increased (information gained beyond any
// closed-system redistribution).
struct ShannonCheck {
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  double vn_entropy_before = 0.0;  // nats, at polarization scale eps0
  double vn_entropy_after = 0.0;
  bool bypassed = false;
};

ShannonCheck shannon_bound_check(const SpinState& before, const SpinState& after,
                                 const SpinSystem& system, double eps0 = 1e-5);

// Schedule text format: one step per line.
//   RESET <computation> <reset> <delay_s>
//   COMPRESS <a> <b> <c> PUMP <a|b|c>
//   REPEAT <n> {        ... lines ...        }
// '#' starts a comment.  REPEAT blocks (closing '}' on its own line) are
// expanded during parsing, so the returned schedule is flat.
Schedule parse_schedule(const std::string& body);
std::string serialize_schedule(const Schedule& schedule);

}  // namespace spincool::cooling
