#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spincool/core.hpp"
#include "spincool/report.hpp"

// Post-processing: relaxation-curve fitting, enhancement factors, Gd
// relaxivity modelling, lifetime-ratio tables, and stick spectra.
namespace spincool::analysis {

using core::SpinState;
using core::SpinSystem;
using core::VectorXd;

// Result of fitting an inversion-recovery curve to
//   eps(tau) = equilibrium * (1 - 2 * amplitude * exp(-tau / t1_s)).
// The three-parameter form tolerates imperfect inversion even though
// synthetic curves invert exactly.  `converged` is false when the iteration
// limit was reached; the fit values and residual are still reported.
struct T1Fit {
  double t1_s = 0.0;
  double amplitude = 0.0;    // A; 1.0 for perfect inversion
  double equilibrium = 0.0;  // eps at tau -> infinity
  double residual = 0.0;     // rms misfit in eps units
  bool converged = false;
  int iterations = 0;
};

// Levenberg-Marquardt least squares with analytic derivatives.
// Initialization: T1 from the tau where the curve changes sign (median tau
// when it never does), A = 1, equilibrium from the latest sample.  Stops when
// the relative parameter change drops below 1e-10 or after 200 iterations.
// Throws std::invalid_argument on fewer than 3 points, duplicate tau,
// negative tau, non-finite samples, or a constant curve.
T1Fit fit_t1(const std::vector<std::pair<double, double>>& curve);

// Per-spin polarization relative to the system's own equilibrium.
// Thermal state -> all exactly 1.
VectorXd enhancement_factors(const SpinState& state, const SpinSystem& system);

// Linear 1/T1 response to a paramagnetic dopant.
struct RelaxivityModel {
  VectorXd r1;       // s^-1 mM^-1, per spin, non-negative
  VectorXd base_t1;  // undoped T1 per spin, seconds
};

// New system with T1_i' = base_t1_i / (1 + base_t1_i * r1_i * c).  T2 is
// scaled by the same factor as T1 (a documented assumption; no independent
// T2 relaxivity is modelled).  Shifts, couplings, and temperature carry over.
// Throws std::invalid_argument on negative concentration, negative r1,
// non-positive base_t1, or size mismatch.
SpinSystem apply_relaxivity(const SpinSystem& system, const RelaxivityModel& model,
                            double concentration_mm);

// Inverts the linear model from one doped/undoped measurement pair:
// r1_i = (1/T1_doped_i - 1/T1_base_i) / c.  Requires matching labels and a
// positive concentration; throws if any computed r1 is negative (the doped
// lifetime must not exceed the base one).
RelaxivityModel relaxivity_from_pair(const SpinSystem& base, const SpinSystem& doped,
                                     double concentration_mm);

// Lifetime ratios R(c, reset) = T1(c) / T1(reset) for every spin c other
// than the reset spin, keyed by (label, reset label).
RatioTable ratio_table(const SpinSystem& system, const std::string& reset);

// One first-order line of a read-pulse spectrum.
struct SpectrumLine {
  int spin = 0;             // index of the spin whose multiplet this is
  std::string label;        // its label
  double frequency_hz = 0;  // rotating-frame offset: shift +- sum J/2
  double amplitude = 0;     // signed; phase-sensitive along the read axis
};

// Applies an ideal 90deg read pulse to every spin of `species` and resolves
// the resulting transverse magnetization into first-order multiplet lines.
// A spin's lines sit at shift_i + sum_j (+-J_ij/2) over its coupled
// partners; coinciding frequencies within a multiplet merge.  Amplitudes are
// signed read-axis coefficients, so the sum over a spin's multiplet equals
// its longitudinal polarization before the pulse.  Lines below 1e-12 are
// dropped; a state with nothing to read returns an empty list.  The input
// state is not modified.  Throws std::invalid_argument when the species is
// absent.
std::vector<SpectrumLine> stick_spectrum(const SpinState& state, const SpinSystem& system,
                                         core::Species species);

}  // namespace spincool::analysis
